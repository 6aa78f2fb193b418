# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import abc
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy
from scipy import integrate
from sympy.parsing import sympy_parser

from . import meta
from ._abc import DistanceFields, FermiChart, Scenario
from ._coordinates import CYLINDRICAL, GridCoordinates
from .errors import ChartError, GeometryError


TWO_PI = 2.0 * math.pi


class SphereChart(FermiChart):
    """Fermi chart around a curve of the unit sphere.

    F(y¹, y̆, ȳ) = (1 − y¹)(cos y̆ γ̂(t) + sin y̆ n(t)) where t
    advances by arclength ȳ from the base parameter and n = γ̂ × T.
    """

    def __init__(self, scenario: '_SphereCurve', t0: float,
                 radius: float) -> None:
        self.__scenario = scenario
        self.__t0 = float(t0)
        self.__radius = radius

    @property
    def base_point(self) -> np.ndarray:
        g, _, _ = self.__scenario.curve(np.array([self.__t0]))
        return g[0]

    @property
    def radius(self) -> float:
        return self.__radius

    @property
    def dim(self) -> int:
        return 3

    @property
    def codim(self) -> int:
        return 2

    @property
    def frame(self) -> Dict[str, np.ndarray]:
        g, tangent, normal = self.__scenario.moving_frame(
            np.array([self.__t0]))
        return {'inward': -g[0], 'normal': normal[:1],
                'tangent': tangent[:1]}

    def map(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[1] != 3:
            raise ChartError(f'expected 3 chart coordinates, got {y.shape[1]}')
        t = self.__scenario.advance(self.__t0, y[:, 2])
        g, _, normal = self.__scenario.moving_frame(t)
        lat = y[:, 1]
        h = np.cos(lat)[:, None] * g + np.sin(lat)[:, None] * normal
        return (1.0 - y[:, 0])[:, None] * h


class _SphereCurve(Scenario):
    """Ω the unit ball of ℝ³ and Σ_1 a closed curve on its boundary.

    Subclasses describe the curve by a 2π-periodic unit-sphere
    parametrisation γ̂(t) together with its first two derivatives.
    """

    _logger = logging.getLogger('numlab.hardy.geometry')

    def __init__(self, *, beta: float, certified_beta: float) -> None:
        if not 0.0 < beta <= self.beta0:
            raise GeometryError(
                f'beta must lie in (0, {self.beta0}], got {beta}')
        super().__init__(N=3, k=1, beta=float(beta))
        self._certified_beta = float(certified_beta)

    @abc.abstractmethod
    def curve(self, t: np.ndarray
              ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """γ̂(t), γ̂'(t) and γ̂''(t), each with shape (M, 3)."""
        pass

    @abc.abstractmethod
    def project(self, x_bar: np.ndarray) -> np.ndarray:
        """Parameter t maximising x̄·γ̂(t) for unit vectors x̄."""
        pass

    @abc.abstractmethod
    def advance(self, t0: float, arclength: np.ndarray) -> np.ndarray:
        """Parameter reached from t0 after the signed arclength."""
        pass

    @property
    def certified_beta(self) -> float:
        return self._certified_beta

    @property
    def sigma_periodic(self) -> bool:
        return True

    @property
    def rho_floor(self) -> float:
        # 1 − |x| and |x − γ̂| cancel below this radius
        return 1e-10

    def moving_frame(self, t: np.ndarray
                     ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """γ̂, unit tangent T and in-sphere normal n = γ̂ × T."""
        g, g1, _ = self.curve(t)
        tangent = g1 / np.linalg.norm(g1, axis=1)[:, None]
        return g, tangent, np.cross(g, tangent)

    def speed(self, t: np.ndarray) -> np.ndarray:
        _, g1, _ = self.curve(np.asarray(t, dtype=float))
        return np.linalg.norm(g1, axis=1)

    def _delta_hat(self, x_bar: np.ndarray, g: np.ndarray) -> np.ndarray:
        # chord form keeps full precision near Σ
        chord = np.linalg.norm(x_bar - g, axis=1)
        return 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))

    def fields(self, points: np.ndarray) -> DistanceFields:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(x, axis=1)
        with np.errstate(invalid='ignore', divide='ignore'):
            x_bar = x / r[:, None]
        t = self.project(x_bar)
        g, _, _ = self.curve(t)
        d = 1.0 - r
        delta_hat = self._delta_hat(x_bar, g)
        return DistanceFields(
            d=d,
            delta=np.linalg.norm(x - g, axis=1),
            delta_hat=delta_hat,
            delta_tilde=np.sqrt(d ** 2 + delta_hat ** 2),
            psi=t,
            x_bar=x_bar,
            sigma=g)

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.linalg.norm(np.atleast_2d(points), axis=1) < 1.0

    def boundary_laplacian(self, points: np.ndarray) -> np.ndarray:
        return -2.0 / np.linalg.norm(np.atleast_2d(points), axis=1)

    def boundary_gradient(self, points: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        return -x / np.linalg.norm(x, axis=1)[:, None]

    def chart(self, base_point: Optional[Sequence[float]] = None
              ) -> FermiChart:
        if base_point is None:
            return SphereChart(self, 0.0, radius=0.5 * self.beta0)
        base = np.atleast_2d(np.asarray(base_point, dtype=float))
        t0 = self.project(base / np.linalg.norm(base))
        g, _, _ = self.curve(t0)
        if np.linalg.norm(g[0] - base[0]) > 1e-9:
            raise ChartError(f'{base[0].tolist()} is not a point of Σ_1')
        return SphereChart(self, float(t0[0]), radius=0.5 * self.beta0)

    def sigma_domain(self) -> List[Tuple[float, float]]:
        return [(0.0, TWO_PI)]

    def sigma_points(self, s: np.ndarray) -> np.ndarray:
        g, _, _ = self.curve(np.atleast_2d(s)[:, 0])
        return g

    def sigma_density(self, s: np.ndarray) -> np.ndarray:
        return self.speed(np.atleast_2d(s)[:, 0])

    def collar_angles(self) -> Tuple[float, float]:
        return -0.5 * math.pi, 0.5 * math.pi

    def collar_map(self, rho: np.ndarray, theta: np.ndarray,
                   s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        rho = np.asarray(rho, dtype=float)
        theta = np.asarray(theta, dtype=float)
        t = np.atleast_2d(s)[:, 0]
        d = rho * np.cos(theta)
        lat = rho * np.sin(theta)

        g, g1, g2 = self.curve(t)
        speed = np.linalg.norm(g1, axis=1)
        tangent = g1 / speed[:, None]
        normal = np.cross(g, tangent)
        along = g2 - tangent * np.sum(tangent * g2, axis=1)[:, None]
        twist = np.sum(np.cross(g, along / speed[:, None]) * tangent, axis=1)

        h = np.cos(lat)[:, None] * g + np.sin(lat)[:, None] * normal
        x = (1.0 - d)[:, None] * h
        area = np.abs(np.cos(lat) * speed + np.sin(lat) * twist)
        return x, rho * (1.0 - d) ** 2 * area

    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return -np.ones(3), np.ones(3)

    def volume_inside(self, lower: np.ndarray,
                      upper: np.ndarray) -> np.ndarray:
        lower, upper = np.atleast_2d(lower), np.atleast_2d(upper)
        far = np.maximum(lower ** 2, upper ** 2)
        return np.sum(far, axis=1) < 1.0

    def excluded(self, points: np.ndarray,
                 steps: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(points)
        reach = 2.0 * np.asarray(steps, dtype=float)
        r = np.linalg.norm(x, axis=1)
        reasons = np.full(x.shape[0], '', dtype=object)
        reasons[r <= reach + 1e-8] = 'origin'
        reasons[r + reach >= 1.0] = 'outside domain'
        return reasons


class BallEquator(_SphereCurve, kind=meta.ScenarioKind.BALL_EQUATOR):
    """The unit ball of ℝ³ with Σ_1 the equator {z = 0, |x| = 1}."""

    def __init__(self, *, beta: float = 0.05,
                 certified_beta: float = 0.0125) -> None:
        super().__init__(beta=beta, certified_beta=certified_beta)

    @property
    def beta0(self) -> float:
        return 0.5

    @property
    def sigma_measure(self) -> float:
        return TWO_PI

    def to_config(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'beta': self.beta,
                'certified_beta': self._certified_beta}

    def curve(self, t: np.ndarray
              ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)
        zero = np.zeros_like(t)
        g = np.stack([np.cos(t), np.sin(t), zero], axis=1)
        g1 = np.stack([-np.sin(t), np.cos(t), zero], axis=1)
        return g, g1, -g

    def project(self, x_bar: np.ndarray) -> np.ndarray:
        x_bar = np.atleast_2d(x_bar)
        return np.mod(np.arctan2(x_bar[:, 1], x_bar[:, 0]), TWO_PI)

    def advance(self, t0: float, arclength: np.ndarray) -> np.ndarray:
        return np.mod(t0 + np.asarray(arclength, dtype=float), TWO_PI)

    def _delta_hat(self, x_bar: np.ndarray, g: np.ndarray) -> np.ndarray:
        return np.abs(np.arcsin(np.clip(x_bar[:, 2], -1.0, 1.0)))

    @property
    def grid_coordinates(self) -> GridCoordinates:
        return CYLINDRICAL

    def grid_axes(self, n: int, gamma: float) -> List[np.ndarray]:
        """Cylindrical (r, θ, z) nodes graded toward r = 1 and z = 0."""
        if n < 2 or n % 2:
            raise GeometryError(f'the ball grid needs an even n >= 2, got {n}')
        half = n // 2
        graded = (np.arange(half + 1) / half) ** gamma
        radial = 1.0 - (np.arange(n, -1, -1) / n) ** gamma
        return [radial, np.linspace(0.0, TWO_PI, n + 1),
                np.concatenate([-graded[:0:-1], graded])]

    def volume_inside(self, lower: np.ndarray,
                      upper: np.ndarray) -> np.ndarray:
        lower, upper = np.atleast_2d(lower), np.atleast_2d(upper)
        far = np.maximum(lower[:, 2] ** 2, upper[:, 2] ** 2)
        return upper[:, 0] ** 2 + far < 1.0

    def excluded(self, points: np.ndarray,
                 steps: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(points)
        reasons = super().excluded(x, steps)
        axis = np.hypot(x[:, 0], x[:, 1]) <= 2.0 * np.asarray(steps) + 1e-8
        reasons[axis & (reasons == '')] = 'polar axis'
        return reasons


class ParametricCurveOnSphere(_SphereCurve,
                              kind=meta.ScenarioKind.PARAMETRIC_CURVE):
    """Σ_1 the radial projection γ̂ = c/|c| of a closed curve c(t).

    The three components of c are sympy expressions in ``t``, periodic
    with period 2π. Derivatives of γ̂ are symbolic; the nearest-point
    projection uses a coarse search refined by Newton steps.
    """

    _coarse = 512
    _table = 65537

    def __init__(self, *, curve: Sequence[str] = ('cos(t)', 'sin(t)',
                                                  '0.3*sin(2*t)'),
                 beta: float = 0.05, certified_beta: float = 0.0125) -> None:
        super().__init__(beta=beta, certified_beta=certified_beta)
        if len(curve) != 3:
            raise GeometryError(
                f'a curve needs three components, got {len(curve)}')
        self._components = tuple(str(c) for c in curve)
        symbol = sympy.Symbol('t', real=True)
        try:
            c = sympy.Matrix([sympy_parser.parse_expr(
                expr, local_dict={'t': symbol}) for expr in self._components])
        except (SyntaxError, TypeError, sympy.SympifyError) as exc:
            raise GeometryError(f'cannot parse curve: {exc}') from None
        extra = set().union(*(e.free_symbols for e in c)) - {symbol}
        if extra:
            raise GeometryError(
                f'curve may only depend on t, found '
                f'{", ".join(sorted(s.name for s in extra))}')

        g = c / sympy.sqrt(c.dot(c))
        g1 = g.diff(symbol)
        g2 = g1.diff(symbol)
        self._funcs = [sympy.lambdify(symbol, list(e), modules='numpy')
                       for e in (g, g1, g2)]

        ts = np.linspace(0.0, TWO_PI, self._table)
        speed = self.speed(ts)
        if not np.all(np.isfinite(speed)) or np.min(speed) <= 1e-9:
            raise GeometryError('curve is not a regular closed curve on the '
                                'sphere')
        self._ts = ts
        self._cumulative = integrate.cumulative_trapezoid(speed, ts,
                                                          initial=0.0)
        self._grid = np.linspace(0.0, TWO_PI, self._coarse, endpoint=False)
        self._grid_points, _, _ = self.curve(self._grid)
        self._logger.debug('curve %s has length %.6g', self._components,
                           self._cumulative[-1])

    @property
    def beta0(self) -> float:
        return 0.25

    @property
    def sigma_measure(self) -> float:
        return float(self._cumulative[-1])

    def to_config(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'curve': list(self._components),
                'beta': self.beta, 'certified_beta': self._certified_beta}

    def _evaluate(self, index: int, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        parts = self._funcs[index](t)
        return np.stack([np.broadcast_to(np.asarray(p, dtype=float), t.shape)
                         for p in parts], axis=1)

    def curve(self, t: np.ndarray
              ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self._evaluate(0, t), self._evaluate(1, t),
                self._evaluate(2, t))

    def project(self, x_bar: np.ndarray) -> np.ndarray:
        x_bar = np.atleast_2d(np.asarray(x_bar, dtype=float))
        t = np.empty(x_bar.shape[0])
        for start in range(0, x_bar.shape[0], 4096):
            chunk = x_bar[start:start + 4096]
            scores = chunk @ self._grid_points.T
            t[start:start + 4096] = self._grid[np.argmax(scores, axis=1)]

        h = TWO_PI / self._coarse
        for _ in range(8):
            _, g1, g2 = self.curve(t)
            f1 = np.sum(x_bar * g1, axis=1)
            f2 = np.sum(x_bar * g2, axis=1)
            concave = f2 < 0.0
            step = np.where(concave, -f1 / np.where(concave, f2, -1.0),
                            np.sign(f1) * h)
            t = t + np.clip(step, -h, h)
        return np.mod(t, TWO_PI)

    def advance(self, t0: float, arclength: np.ndarray) -> np.ndarray:
        total = self._cumulative[-1]
        s0 = np.interp(np.mod(t0, TWO_PI), self._ts, self._cumulative)
        s = np.mod(s0 + np.asarray(arclength, dtype=float), total)
        return np.interp(s, self._cumulative, self._ts)

    def grid_axes(self, n: int, gamma: float) -> List[np.ndarray]:
        if n < 2:
            raise GeometryError(f'the ball grid needs n >= 2, got {n}')
        return [np.linspace(-1.0, 1.0, n + 1) for _ in range(3)]
