# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import meta
from ._abc import DistanceFields, FermiChart, Scenario, sphere_area
from .errors import ChartError, GeometryError


class FlatChart(FermiChart):
    """Fermi chart of the slab: a translation of the coordinate axes."""

    def __init__(self, base_point: np.ndarray, radius: float,
                 codim: int) -> None:
        self.__base = np.asarray(base_point, dtype=float)
        self.__radius = radius
        self.__codim = codim

    @property
    def base_point(self) -> np.ndarray:
        return self.__base.copy()

    @property
    def radius(self) -> float:
        return self.__radius

    @property
    def dim(self) -> int:
        return self.__base.size

    @property
    def codim(self) -> int:
        return self.__codim

    @property
    def frame(self) -> Dict[str, np.ndarray]:
        eye = np.eye(self.dim)
        return {'inward': eye[0],
                'normal': eye[1:self.__codim],
                'tangent': eye[self.__codim:]}

    def map(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[1] != self.dim:
            raise ChartError(
                f'expected {self.dim} chart coordinates, got {y.shape[1]}')
        return self.__base[None, :] + y


class FlatSlab(Scenario, kind=meta.ScenarioKind.FLAT_SLAB):
    """Ω = (0,1)×(−1,1)^{N−1}, Σ_k = {0}×{0}^{N−k−1}×[−½,½]^k.

    Axis 0 is the inward normal y¹, axes 1..N−k−1 are the in-face normal
    directions y̆ and the last k axes are tangential to Σ_k.
    """

    def __init__(self, *, N: int = 3, k: int = 1, beta: float = 0.1,
                 certified_beta: float = 0.0125) -> None:
        if N < 3:
            raise GeometryError(f'N must be at least 3, got {N}')
        if not 1 <= k <= N - 2:
            raise GeometryError(f'k must lie in [1, N-2] = [1, {N - 2}], '
                                f'got {k}')
        if not 0.0 < beta <= self.beta0:
            raise GeometryError(
                f'beta must lie in (0, {self.beta0}], got {beta}')
        super().__init__(N=N, k=k, beta=float(beta))
        self._certified_beta = float(certified_beta)

    @property
    def beta0(self) -> float:
        # on δ̃ < ¼ with x¹ < ½ the nearest face is x¹ = 0, so δ = δ̃
        return 0.25

    @property
    def certified_beta(self) -> float:
        return self._certified_beta

    @property
    def sigma_measure(self) -> float:
        return 1.0

    @property
    def sigma_periodic(self) -> bool:
        return False

    def to_config(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'N': self.N, 'k': self.k,
                'beta': self.beta, 'certified_beta': self._certified_beta}

    def fields(self, points: np.ndarray) -> DistanceFields:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        m = self.codim
        x1 = x[:, 0]
        transverse = x[:, 1:m]
        tangential = x[:, m:]
        clipped = np.clip(tangential, -0.5, 0.5)

        delta_hat = np.sqrt(np.sum(transverse ** 2, axis=1)
                            + np.sum((tangential - clipped) ** 2, axis=1))
        d = np.minimum(x1, 1.0 - x1)
        if x.shape[1] > 1:
            d = np.minimum(d, np.min(1.0 - np.abs(x[:, 1:]), axis=1))

        x_bar = x.copy()
        x_bar[:, 0] = 0.0
        sigma = np.zeros_like(x)
        sigma[:, m:] = clipped
        return DistanceFields(
            d=d,
            delta=np.sqrt(x1 ** 2 + delta_hat ** 2),
            delta_hat=delta_hat,
            delta_tilde=np.sqrt(d ** 2 + delta_hat ** 2),
            psi=tangential[:, 0].copy(),
            x_bar=x_bar,
            sigma=sigma)

    def contains(self, points: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(points)
        return ((x[:, 0] > 0.0) & (x[:, 0] < 1.0)
                & np.all(np.abs(x[:, 1:]) < 1.0, axis=1))

    def boundary_laplacian(self, points: np.ndarray) -> np.ndarray:
        return np.zeros(np.atleast_2d(points).shape[0])

    def boundary_gradient(self, points: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(points)
        grad = np.zeros_like(x, dtype=float)
        grad[:, 0] = 1.0
        return grad

    def chart(self, base_point: Optional[Sequence[float]] = None
              ) -> FermiChart:
        if base_point is None:
            base = np.zeros(self.N)
        else:
            base = np.asarray(base_point, dtype=float)
            on_sigma = (base.shape == (self.N,)
                        and np.all(base[:self.codim] == 0.0)
                        and np.all(np.abs(base[self.codim:]) <= 0.5))
            if not on_sigma:
                raise ChartError(f'{base.tolist()} is not a point of Σ_k')
        return FlatChart(base, radius=0.5 * self.beta0, codim=self.codim)

    def sigma_domain(self) -> List[Tuple[float, float]]:
        return [(-0.5, 0.5)] * self.k

    def sigma_points(self, s: np.ndarray) -> np.ndarray:
        s = np.atleast_2d(s)
        x = np.zeros((s.shape[0], self.N))
        x[:, self.codim:] = s
        return x

    def sigma_density(self, s: np.ndarray) -> np.ndarray:
        return np.ones(np.atleast_2d(s).shape[0])

    def collar_angles(self) -> Tuple[float, float]:
        if self.codim == 2:
            return -0.5 * math.pi, 0.5 * math.pi
        return 0.0, 0.5 * math.pi

    def collar_map(self, rho: np.ndarray, theta: np.ndarray,
                   s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        # For N - k >= 3 the in-face directions are represented by one
        # meridian; the density carries the |S^{m-2}| sin^{m-2} factor.
        rho = np.asarray(rho, dtype=float)
        theta = np.asarray(theta, dtype=float)
        m = self.codim
        x = self.sigma_points(s)
        x[:, 0] = rho * np.cos(theta)
        x[:, 1] = rho * np.sin(theta)
        if m == 2:
            density = rho.copy()
        else:
            density = (sphere_area(m - 2) * np.sin(theta) ** (m - 2)
                       * rho ** (m - 1))
        return x, density

    def grid_axes(self, n: int, gamma: float) -> List[np.ndarray]:
        if n < 2 or n % 2:
            raise GeometryError(f'the slab grid needs an even n >= 2, got {n}')
        half = n // 2
        graded = (np.arange(half + 1) / half) ** gamma
        symmetric = np.concatenate([-graded[:0:-1], graded])
        axes = [(np.arange(n + 1) / n) ** gamma]
        axes += [symmetric.copy() for _ in range(self.codim - 1)]
        axes += [np.linspace(-1.0, 1.0, n + 1) for _ in range(self.k)]
        return axes

    def collar_mask(self, points: np.ndarray,
                    beta: Optional[float] = None) -> np.ndarray:
        # δ̃ is also small along the back face x¹ = 1
        x = np.atleast_2d(points)
        return super().collar_mask(x, beta) & (x[:, 0] < 0.5)

    def volume_inside(self, lower: np.ndarray,
                      upper: np.ndarray) -> np.ndarray:
        lower, upper = np.atleast_2d(lower), np.atleast_2d(upper)
        return ((lower[:, 0] >= 0.0) & (upper[:, 0] <= 1.0)
                & np.all(lower[:, 1:] >= -1.0, axis=1)
                & np.all(upper[:, 1:] <= 1.0, axis=1))

    def excluded(self, points: np.ndarray,
                 steps: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(points)
        reach = 2.0 * np.asarray(steps, dtype=float)
        reasons = np.full(x.shape[0], '', dtype=object)
        edge = np.any(np.abs(np.abs(x[:, self.codim:]) - 0.5)
                      <= reach[:, None], axis=1)
        reasons[edge] = 'patch edge'
        reasons[x[:, 0] - reach <= 0.0] = 'outside domain'
        return reasons
