# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import abc
import enum
from typing import Dict, Optional, Mapping, Any

from .errors import ConfigError, GeometryError


class ScenarioKind(enum.Enum):
    """Model geometries known to the laboratory.

    FLAT_SLAB:
        Ω = (0,1)×(−1,1)^{N−1} with Σ_k a compact patch of the face
        y¹ = 0.

    BALL_EQUATOR:
        Ω the unit ball of ℝ³ with Σ_1 the equator circle.

    PARAMETRIC_CURVE:
        Ω the unit ball of ℝ³ with Σ_1 the radial projection onto the unit
        sphere of a user supplied closed curve.
    """
    FLAT_SLAB = 'flat_slab'
    BALL_EQUATOR = 'ball_equator'
    PARAMETRIC_CURVE = 'parametric_curve'


class _ScenarioMeta(abc.ABCMeta):

    _kinds: Dict[str, type] = {}

    def __new__(mcls, name, bases, dct, *,
                kind: Optional[ScenarioKind] = None):
        cls = super().__new__(mcls, name, bases, dct)
        cls._kind = kind  # type: ignore
        if kind is None:
            return cls

        if kind.value in mcls._kinds:
            raise RuntimeError(
                f'cannot register a scenario for {kind.value!r} kind: '
                f'another scenario for this kind has already been '
                f'registered')

        mcls._kinds[kind.value] = cls
        return cls

    @classmethod
    def get(cls, kind_name: str) -> Optional[type]:
        return cls._kinds.get(kind_name)

    @property
    def kind(cls) -> Optional[ScenarioKind]:
        return cls._kind  # type: ignore


def get_scenario_registry() -> Mapping[str, type]:
    return dict(_ScenarioMeta._kinds)


def scenario_from_config(block: Mapping[str, Any]) -> Any:
    """Build a registered scenario from its JSON configuration block.

    Parameters
    ----------
    block: Mapping[str, Any]
        The ``scenario`` object of an experiment configuration, for instance
        ``{"kind": "flat_slab", "N": 3, "k": 1, "beta": 0.1}``.

    Returns
    -------
    Scenario:
        An instance of the class registered for ``block['kind']``.
    """
    if not isinstance(block, Mapping):
        raise ConfigError('expected an object', field='scenario')

    kind_name = block.get('kind')
    if not isinstance(kind_name, str):
        raise ConfigError('missing scenario kind', field='scenario.kind')

    scenario_cls = _ScenarioMeta.get(kind_name)
    if scenario_cls is None:
        known = ', '.join(sorted(_ScenarioMeta._kinds))
        raise ConfigError(
            f'unknown scenario kind {kind_name!r} (known: {known})',
            field='scenario.kind')

    options = {key: value for key, value in block.items() if key != 'kind'}
    try:
        return scenario_cls.from_options(**options)  # type: ignore
    except (TypeError, GeometryError) as exc:
        raise ConfigError(str(exc), field='scenario') from None

