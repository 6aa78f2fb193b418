# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import json
import pathlib
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import _utils
from ._abc import Scenario
from .errors import ConfigError, WeightError
from .weights import WeightTriple


_RUN_DEFAULTS: Dict[str, Any] = {
    'lambdas': '-10:10:21',
    'grid_sizes': [16, 32],
    'gamma': 2.0,
    'beta': None,
    'tol': 1e-8,
    'max_iter': 500,
    'width_tol': 0.5,
    'samples': 10000,
    'seed': 0,
    'epsilons': [0.5],
    'output_dir': 'hardy-out',
    'gauss_order': 4,
    'warm_start': True,
    'tau': 0.1,
}


class RunOptions:
    """The ``run`` block of an experiment configuration."""

    def __init__(self, *, lambdas: str, grid_sizes: Sequence[int],
                 gamma: float, beta: Optional[float], tol: float,
                 max_iter: int, width_tol: float, samples: int, seed: int,
                 epsilons: Sequence[float], output_dir: str,
                 gauss_order: int, warm_start: bool, tau: float) -> None:
        self.__lambdas = _utils.parse_lambda_grid(lambdas)
        self.__lambda_spec = str(lambdas)
        self.__grid_sizes = tuple(int(n) for n in grid_sizes)
        self.__gamma = float(gamma)
        self.__beta = None if beta is None else float(beta)
        self.__tol = float(tol)
        self.__max_iter = int(max_iter)
        self.__width_tol = float(width_tol)
        self.__samples = int(samples)
        self.__seed = int(seed)
        self.__epsilons = tuple(float(e) for e in epsilons)
        self.__output_dir = str(output_dir)
        self.__gauss_order = int(gauss_order)
        self.__warm_start = bool(warm_start)
        self.__tau = float(tau)
        self._validate()

    def _validate(self) -> None:
        positive = {'run.tol': self.__tol, 'run.width_tol': self.__width_tol,
                    'run.gamma': self.__gamma, 'run.tau': self.__tau,
                    'run.max_iter': self.__max_iter,
                    'run.samples': self.__samples,
                    'run.gauss_order': self.__gauss_order}
        if self.__beta is not None:
            positive['run.beta'] = self.__beta
        for field, value in positive.items():
            if not value > 0:
                raise ConfigError('must be positive', field=field)
        if not self.__grid_sizes or min(self.__grid_sizes) < 8:
            raise ConfigError('need grid sizes of at least 8',
                              field='run.grid_sizes')
        if any(not 0.0 <= e < 1.0 for e in self.__epsilons):
            raise ConfigError('every epsilon must lie in [0, 1)',
                              field='run.epsilons')

    @classmethod
    def from_block(cls, block: Optional[Mapping[str, Any]]) -> 'RunOptions':
        if block is None:
            block = {}
        if not isinstance(block, Mapping):
            raise ConfigError('expected an object', field='run')
        unknown = sorted(set(block) - set(_RUN_DEFAULTS) - {'command'})
        if unknown:
            raise ConfigError(f'unknown keys {unknown}', field='run')
        options = dict(_RUN_DEFAULTS)
        options.update({k: v for k, v in block.items() if k != 'command'})
        try:
            return cls(**options)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field='run') from None

    @property
    def lambdas(self) -> np.ndarray:
        return self.__lambdas.copy()

    @property
    def lambda_spec(self) -> str:
        return self.__lambda_spec

    @property
    def grid_sizes(self) -> Tuple[int, ...]:
        return self.__grid_sizes

    @property
    def gamma(self) -> float:
        return self.__gamma

    @property
    def beta(self) -> Optional[float]:
        return self.__beta

    @property
    def tol(self) -> float:
        return self.__tol

    @property
    def max_iter(self) -> int:
        return self.__max_iter

    @property
    def width_tol(self) -> float:
        return self.__width_tol

    @property
    def samples(self) -> int:
        return self.__samples

    @property
    def seed(self) -> int:
        return self.__seed

    @property
    def epsilons(self) -> Tuple[float, ...]:
        return self.__epsilons

    @property
    def output_dir(self) -> pathlib.Path:
        return pathlib.Path(self.__output_dir)

    @property
    def gauss_order(self) -> int:
        return self.__gauss_order

    @property
    def warm_start(self) -> bool:
        return self.__warm_start

    @property
    def tau(self) -> float:
        return self.__tau

    def to_json(self) -> Dict[str, Any]:
        return {'lambdas': self.__lambda_spec,
                'grid_sizes': list(self.__grid_sizes),
                'gamma': self.__gamma, 'beta': self.__beta,
                'tol': self.__tol, 'max_iter': self.__max_iter,
                'width_tol': self.__width_tol, 'samples': self.__samples,
                'seed': self.__seed, 'epsilons': list(self.__epsilons),
                'output_dir': self.__output_dir,
                'gauss_order': self.__gauss_order,
                'warm_start': self.__warm_start, 'tau': self.__tau}


class ExperimentConfig:
    """A validated scenario, weight triple and run block."""

    def __init__(self, *, scenario: Scenario, weights: WeightTriple,
                 run: RunOptions, command: Optional[str] = None) -> None:
        self.__scenario = scenario
        self.__weights = weights
        self.__run = run
        self.__command = command

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> 'ExperimentConfig':
        if not isinstance(data, Mapping):
            raise ConfigError('the configuration must be a JSON object')
        unknown = sorted(set(data) - {'scenario', 'weights', 'run'})
        if unknown:
            raise ConfigError(f'unknown top-level keys {unknown}')
        if 'scenario' not in data:
            raise ConfigError('missing block', field='scenario')

        scenario = Scenario.from_config(data['scenario'])
        weights_block = data.get('weights', {})
        if not (weights_block == 'unweighted'
                or isinstance(weights_block, Mapping)):
            raise ConfigError('expected an object or "unweighted"',
                              field='weights')
        if isinstance(weights_block, Mapping):
            unknown = sorted(set(weights_block) - {'p', 'q', 'eta'})
            if unknown:
                raise ConfigError(f'unknown keys {unknown}', field='weights')
        try:
            weights = WeightTriple.from_config(weights_block, dim=scenario.N)
        except WeightError as exc:
            raise ConfigError(str(exc), field='weights') from None

        run_block = data.get('run')
        run = RunOptions.from_block(run_block)
        command = None
        if isinstance(run_block, Mapping):
            command = run_block.get('command')
        return cls(scenario=scenario, weights=weights, run=run,
                   command=command)

    @classmethod
    def from_json(cls, text: str) -> 'ExperimentConfig':
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f'invalid JSON: {exc.msg}',
                              line=exc.lineno) from None
        return cls.from_mapping(data)

    @classmethod
    def load(cls, path: Union[str, pathlib.Path]) -> 'ExperimentConfig':
        try:
            text = pathlib.Path(path).read_text(encoding='utf-8')
        except OSError as exc:
            raise ConfigError(f'cannot read {str(path)!r}: '
                              f'{exc.strerror}') from None
        return cls.from_json(text)

    def with_overrides(self, **overrides: Any) -> 'ExperimentConfig':
        """A copy with ``run`` keys replaced (``None`` values are skipped)."""
        block = self.__run.to_json()
        block.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(scenario=self.__scenario,
                                weights=self.__weights,
                                run=RunOptions.from_block(block),
                                command=self.__command)

    @property
    def scenario(self) -> Scenario:
        return self.__scenario

    @property
    def weights(self) -> WeightTriple:
        return self.__weights

    @property
    def run(self) -> RunOptions:
        return self.__run

    @property
    def command(self) -> Optional[str]:
        return self.__command

    def to_json(self) -> Dict[str, Any]:
        weights: Union[str, Dict[str, str]] = self.__weights.to_config()
        if self.__weights.is_unweighted:
            weights = 'unweighted'
        return {'scenario': self.__scenario.to_config(),
                'weights': weights,
                'run': self.__run.to_json()}
