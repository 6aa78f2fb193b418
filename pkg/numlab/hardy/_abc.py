# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import abc
import math
import typing
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from ._coordinates import CARTESIAN, GridCoordinates
from .meta import _ScenarioMeta, ScenarioKind, scenario_from_config


class DistanceFields(typing.NamedTuple):
    """Vectorised distance data at M points of an N-dimensional scenario."""
    d: np.ndarray
    delta: np.ndarray
    delta_hat: np.ndarray
    delta_tilde: np.ndarray
    psi: np.ndarray
    x_bar: np.ndarray
    sigma: np.ndarray


class FermiChart(abc.ABC):
    """Fermi coordinates (y¹, y̆, ȳ) adapted to Σ_k ⊂ ∂Ω near a point."""

    @property
    @abc.abstractmethod
    def base_point(self) -> np.ndarray:
        """The point P ∈ Σ_k with F(0) = P."""
        pass

    @property
    @abc.abstractmethod
    def radius(self) -> float:
        """Chart radius; coordinates must satisfy |y| < radius."""
        pass

    @property
    @abc.abstractmethod
    def dim(self) -> int:
        """Ambient dimension N."""
        pass

    @property
    @abc.abstractmethod
    def codim(self) -> int:
        """N − k, the number of coordinates in ỹ = (y¹, y̆)."""
        pass

    @property
    @abc.abstractmethod
    def frame(self) -> Dict[str, np.ndarray]:
        """Orthonormal splitting at P: 'tangent', 'normal', 'inward'."""
        pass

    @abc.abstractmethod
    def map(self, y: np.ndarray) -> np.ndarray:
        """Vectorised F: (M, N) chart coordinates to (M, N) points."""
        pass


class Scenario(metaclass=_ScenarioMeta):
    """A model geometry (Ω, Σ_k) with analytic distance evaluators."""

    def __init__(self, *, N: int, k: int, beta: float) -> None:
        self._N = N
        self._k = k
        self._beta = beta

    @classmethod
    def from_options(cls, **options: Any) -> 'Scenario':
        return cls(**options)  # type: ignore

    @staticmethod
    def from_config(block: Mapping[str, Any]) -> 'Scenario':
        return scenario_from_config(block)

    @property
    def kind(self) -> ScenarioKind:
        return type(self).kind  # type: ignore

    @property
    def N(self) -> int:
        return self._N

    @property
    def k(self) -> int:
        return self._k

    @property
    def codim(self) -> int:
        return self._N - self._k

    @property
    def plateau(self) -> float:
        """The Hardy constant (N − k)²/4."""
        return (self._N - self._k) ** 2 / 4.0

    @property
    def beta(self) -> float:
        return self._beta

    @property
    @abc.abstractmethod
    def beta0(self) -> float:
        """Largest collar radius on which δ̃ is smooth for this scenario."""
        pass

    @property
    def rho_floor(self) -> float:
        """Smallest collar radius resolved by the distance evaluators."""
        return 0.0

    @property
    @abc.abstractmethod
    def certified_beta(self) -> float:
        """Collar radius on which the sign sweeps were certified."""
        pass

    @property
    @abc.abstractmethod
    def sigma_measure(self) -> float:
        """The k-dimensional measure |Σ_k|."""
        pass

    @property
    @abc.abstractmethod
    def sigma_periodic(self) -> bool:
        """Whether the Σ_k parameter domain wraps around."""
        pass

    @abc.abstractmethod
    def to_config(self) -> Dict[str, Any]:
        """The JSON configuration block describing this scenario."""
        pass

    @abc.abstractmethod
    def fields(self, points: np.ndarray) -> DistanceFields:
        """Evaluate d, δ, δ̂, δ̃, ψ, x̄ and σ at (M, N) points."""
        pass

    @abc.abstractmethod
    def contains(self, points: np.ndarray) -> np.ndarray:
        """Mask of points inside the open domain Ω."""
        pass

    @abc.abstractmethod
    def boundary_laplacian(self, points: np.ndarray) -> np.ndarray:
        """h = Δd at (M, N) points."""
        pass

    @abc.abstractmethod
    def boundary_gradient(self, points: np.ndarray) -> np.ndarray:
        """∇d at (M, N) points."""
        pass

    @abc.abstractmethod
    def chart(self, base_point: Optional[Sequence[float]] = None
              ) -> FermiChart:
        """Fermi chart centred at a point of Σ_k (a default one if None)."""
        pass

    @abc.abstractmethod
    def sigma_domain(self) -> List[Tuple[float, float]]:
        """Parameter box of Σ_k, one interval per tangential dimension."""
        pass

    @abc.abstractmethod
    def sigma_points(self, s: np.ndarray) -> np.ndarray:
        """Ambient points of Σ_k for (M, k) parameters."""
        pass

    @abc.abstractmethod
    def sigma_density(self, s: np.ndarray) -> np.ndarray:
        """Surface density dσ/ds for (M, k) parameters."""
        pass

    @abc.abstractmethod
    def collar_angles(self) -> Tuple[float, float]:
        """Range of the polar angle θ of collar coordinates."""
        pass

    @abc.abstractmethod
    def collar_map(self, rho: np.ndarray, theta: np.ndarray,
                   s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Collar coordinates (ρ, θ, s) to points and volume density.

        ρ equals δ̃ at the returned points.
        """
        pass

    @property
    def grid_coordinates(self) -> GridCoordinates:
        """Coordinates in which ``grid_axes`` are laid out."""
        return CARTESIAN

    @abc.abstractmethod
    def grid_axes(self, n: int, gamma: float) -> List[np.ndarray]:
        """Node vectors of the tensor grid, one per axis."""
        pass

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of a Cartesian box containing Ω."""
        axes = self.grid_axes(2, 1.0)
        return (np.array([a[0] for a in axes]),
                np.array([a[-1] for a in axes]))

    @abc.abstractmethod
    def volume_inside(self, lower: np.ndarray,
                      upper: np.ndarray) -> np.ndarray:
        """Mask of boxes [lower, upper] contained in the open domain."""
        pass

    @abc.abstractmethod
    def excluded(self, points: np.ndarray,
                 steps: np.ndarray) -> np.ndarray:
        """Reason strings ('' if smooth) for stencils around points."""
        pass

    def collar_mask(self, points: np.ndarray,
                    beta: Optional[float] = None) -> np.ndarray:
        """Mask of Cartesian points of the collar component along Σ_k.

        The domain test is left to the caller.
        """
        beta = self._beta if beta is None else beta
        return self.fields(np.atleast_2d(points)).delta_tilde < beta

    def in_collar(self, points: np.ndarray,
                  beta: Optional[float] = None) -> np.ndarray:
        return self.collar_mask(points, beta) & self.contains(points)

    def sample_collar(self, n: int, *, beta: Optional[float] = None,
                      seed: int = 0, decades: int = 3,
                      margin: float = 0.05) -> np.ndarray:
        """Quasi-random collar points stratified by decade of δ̃.

        Sample i lies in the decade i mod ``decades`` below β, so every
        decade receives the same share of a low-discrepancy sequence.
        """
        beta = self._beta if beta is None else beta
        dim = 2 + self._k
        u = qmc.Halton(d=dim, scramble=False).random(n + 1)[1:]
        rotation = np.random.default_rng(seed).random(dim)
        u = (u + rotation) % 1.0

        decade = np.arange(n) % decades
        rho = beta * 10.0 ** (-(decade + u[:, 0]))
        lo, hi = self.collar_angles()
        pad = margin * (hi - lo)
        theta = lo + pad + (hi - lo - 2.0 * pad) * u[:, 1]

        s = np.empty((n, self._k))
        for j, (a, b) in enumerate(self.sigma_domain()):
            if self.sigma_periodic:
                s[:, j] = a + (b - a) * u[:, 2 + j]
            else:
                inset = 0.1 * (b - a)
                s[:, j] = a + inset + (b - a - 2.0 * inset) * u[:, 2 + j]
        points, _ = self.collar_map(rho, theta, s)
        return points

    def ladder_samples(self, rungs: Sequence[float],
                       per_rung: int = 12) -> Tuple[np.ndarray, np.ndarray]:
        """Deterministic collar points with δ̃ exactly on each rung.

        The same angular pattern is used on every rung, so residual
        constants fitted per rung are comparable.
        """
        lo, hi = self.collar_angles()
        thetas = lo + (hi - lo) * (np.arange(per_rung) + 0.5) / per_rung
        s = np.empty((per_rung, self._k))
        for j, (a, b) in enumerate(self.sigma_domain()):
            phase = (np.arange(per_rung) * (j + 1) * 0.618034) % 1.0
            inset = 0.0 if self.sigma_periodic else 0.2 * (b - a)
            s[:, j] = a + inset + (b - a - 2.0 * inset) * phase
        points, labels = [], []
        for rung in rungs:
            x, _ = self.collar_map(np.full(per_rung, float(rung)), thetas, s)
            points.append(x)
            labels.append(np.full(per_rung, float(rung)))
        return np.concatenate(points), np.concatenate(labels)

    def __repr__(self):
        return (f'<{type(self).__name__} N={self._N} k={self._k} '
                f'beta={self._beta}>')


def sphere_area(dim: int) -> float:
    """Area of the unit sphere S^dim."""
    return 2.0 * math.pi ** ((dim + 1) / 2.0) / math.gamma((dim + 1) / 2.0)
