# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import logging
import typing
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _utils
from ._abc import FermiChart, Scenario
from .errors import ChartError, CollarError


_logger = logging.getLogger('numlab.hardy.geometry')


class CollarPoint(typing.NamedTuple):
    """Distance data of one collar point.

    ``delta_tilde`` is assembled from ``delta_hat`` and ``d``, so
    δ̃² = δ̂² + d² holds to rounding.
    """
    x: np.ndarray
    d: float
    delta: float
    x_bar: np.ndarray
    delta_hat: float
    sigma: np.ndarray
    delta_tilde: float
    singular: bool


class MetricReport(typing.NamedTuple):
    matrix: np.ndarray
    g11_residual: float
    g1b_residual: float
    tangential_residual: float
    step: float


def eval_collar_point(s: Scenario, x: Sequence[float]) -> CollarPoint:
    """Evaluate every distance function of ``s`` at one collar point.

    Parameters
    ----------
    s: Scenario
        The model geometry.
    x: Sequence[float]
        An ambient point of Ω with δ̃(x) < β.

    Returns
    -------
    CollarPoint:
        d, δ, x̄, δ̂, σ(x̄) and δ̃; points of Σ_k are returned with
        ``singular`` set.
    """
    point = np.asarray(x, dtype=float).reshape(1, -1)
    if point.shape[1] != s.N:
        raise CollarError(f'expected a point of R^{s.N}, got {point.shape[1]} '
                          f'coordinates', delta_tilde=float('nan'),
                          beta=s.beta)

    f = s.fields(point)
    delta_tilde = float(f.delta_tilde[0])
    if not np.isfinite(delta_tilde) or delta_tilde >= s.beta:
        raise CollarError(
            f'{point[0].tolist()} is outside the collar: '
            f'delta_tilde={delta_tilde!r} >= beta={s.beta!r} '
            f'(d={float(f.d[0])!r}, delta_hat={float(f.delta_hat[0])!r})',
            delta_tilde=delta_tilde, beta=s.beta)
    if not bool(s.contains(point)[0]) and delta_tilde > 0.0:
        raise CollarError(f'{point[0].tolist()} is outside the domain',
                          delta_tilde=delta_tilde, beta=s.beta)

    return CollarPoint(
        x=point[0],
        d=float(f.d[0]),
        delta=float(f.delta[0]),
        x_bar=f.x_bar[0],
        delta_hat=float(f.delta_hat[0]),
        sigma=f.sigma[0],
        delta_tilde=delta_tilde,
        singular=delta_tilde == 0.0)


def fermi_map(c: FermiChart, y: Sequence[float]) -> np.ndarray:
    """Map chart coordinates (y¹, y̆, ȳ) to an ambient point."""
    coords = np.atleast_2d(np.asarray(y, dtype=float))
    norms = np.linalg.norm(coords, axis=1)
    if np.any(norms >= c.radius):
        raise ChartError(
            f'chart coordinates of norm {float(np.max(norms))!r} exceed the '
            f'chart radius {c.radius!r}')
    mapped = c.map(coords)
    return mapped[0] if np.ndim(y) == 1 else mapped


def metric_components(c: FermiChart, y: Sequence[float],
                      h_fd: Optional[float] = None) -> MetricReport:
    """Metric g_{αβ} = ⟨∂_α F, ∂_β F⟩ by central differences.

    The default step is the relative rule used for every finite
    difference of the package, applied to |ỹ|.
    """
    coords = np.asarray(y, dtype=float).ravel()
    y_tilde = float(np.linalg.norm(coords[:c.codim]))
    if h_fd is None:
        h_fd = float(_utils.fd_step(max(y_tilde, 1e-2)))
    if h_fd <= np.finfo(float).eps * max(1.0, float(np.max(np.abs(coords)))):
        raise ChartError(f'finite-difference step {h_fd!r} underflows')
    if np.linalg.norm(coords) + h_fd >= c.radius:
        raise ChartError(
            f'stencil of radius {h_fd!r} around {coords.tolist()} leaves the '
            f'chart of radius {c.radius!r}')

    n = coords.size
    offsets = np.concatenate([np.eye(n), -np.eye(n)])

    def jacobian(h):
        images = c.map(coords[None, :] + h * offsets)
        return ((images[:n] - images[n:]) / (2.0 * h)).T

    coarse, fine = jacobian(h_fd), jacobian(h_fd / 2.0)
    jac = (4.0 * fine - coarse) / 3.0
    g = jac.T @ jac
    g = 0.5 * (g + g.T)

    g11 = abs(g[0, 0] - 1.0)
    g1b = float(np.max(np.abs(g[0, 1:]))) if n > 1 else 0.0
    deviation = float(np.max(np.abs(g - np.eye(n))))
    tangential = deviation / y_tilde if y_tilde > 0.0 else deviation
    return MetricReport(matrix=g, g11_residual=float(g11), g1b_residual=g1b,
                        tangential_residual=tangential, step=h_fd)


class ExpansionRow(typing.NamedTuple):
    delta_tilde: float
    r1: float
    r2: float
    r3: float
    r4: float


class ExpansionReport:
    """Residuals of the four collar expansions at a set of samples.

    r1 = |δ²/δ̃² − 1|/δ̃, r2 = |∇δ̃·∇d − d/δ̃|,
    r3 = ||∇δ̃| − 1|/δ̃ and r4 = |Δδ̃ − (N−k−1)/δ̃|.
    """

    columns = ('delta_tilde', 'r1', 'r2', 'r3', 'r4')

    def __init__(self, *, rows: List[ExpansionRow],
                 excluded: List[Tuple[Tuple[float, ...], str]],
                 fd_error: np.ndarray) -> None:
        self.__rows = rows
        self.__excluded = excluded
        self.__fd_error = fd_error

    @property
    def rows(self) -> List[ExpansionRow]:
        return list(self.__rows)

    @property
    def excluded(self) -> List[Tuple[Tuple[float, ...], str]]:
        return list(self.__excluded)

    @property
    def fd_error(self) -> np.ndarray:
        return self.__fd_error.copy()

    def column(self, name: str) -> np.ndarray:
        index = self.columns.index(name)
        return np.array([row[index] for row in self.__rows], dtype=float)

    def rung_constants(self, rungs: Sequence[float]
                       ) -> Dict[float, Dict[str, float]]:
        """Fit each residual to a constant on every rung of a δ̃ ladder.

        Samples are assigned to the rung nearest in log δ̃.
        """
        rungs = np.asarray(sorted(rungs, reverse=True), dtype=float)
        dt = self.column('delta_tilde')
        if dt.size == 0:
            return {}
        nearest = np.argmin(np.abs(np.log(dt)[:, None]
                                   - np.log(rungs)[None, :]), axis=1)
        constants = {}
        for j, rung in enumerate(rungs):
            mask = nearest == j
            constants[float(rung)] = {
                name: _utils.fit_constant(self.column(name)[mask])
                for name in self.columns[1:]}
        return constants

    def constant_ratio(self, name: str, rungs: Sequence[float]) -> float:
        """max/min of the fitted constant of ``name`` across the rungs."""
        values = np.array([c[name] for c in
                           self.rung_constants(rungs).values()])
        values = values[np.isfinite(values)]
        if values.size == 0 or np.min(values) <= 0.0:
            return float('inf')
        return float(np.max(values) / np.min(values))

    def __len__(self):
        return len(self.__rows)

    def __repr__(self):
        return (f'<ExpansionReport samples={len(self.__rows)} '
                f'excluded={len(self.__excluded)}>')


def check_distance_expansions(s: Scenario,
                              samples: np.ndarray) -> ExpansionReport:
    """Residuals of the collar expansions of δ̃ at ``samples``.

    Gradients and Laplacians are Richardson-extrapolated central
    differences with the step tied to δ̃. Samples outside the collar, too
    close to Σ_k for the step, or near a non-smooth set of the scenario are
    excluded with a reason.
    """
    points = np.atleast_2d(np.asarray(samples, dtype=float))
    f = s.fields(points)
    dt = f.delta_tilde
    steps = _utils.fd_step(dt)

    reasons = s.excluded(points, steps)
    reasons[(dt >= s.beta) & (reasons == '')] = 'outside collar'
    reasons[(dt < 10.0 * steps) | (dt <= 0.0)] = 'singular'
    keep = reasons == ''
    excluded = [(tuple(float(v) for v in points[i]), str(reasons[i]))
                for i in np.flatnonzero(~keep)]
    if excluded:
        _logger.warning('%d of %d expansion samples excluded',
                        len(excluded), points.shape[0])

    x, h = points[keep], steps[keep]
    f_keep = s.fields(x)
    dt_keep, d_keep = f_keep.delta_tilde, f_keep.d

    def delta_tilde(p):
        return s.fields(p).delta_tilde

    grad_dt, err_grad = _utils.central_gradient(delta_tilde, x, h)
    lap_dt, err_lap = _utils.central_laplacian(delta_tilde, x, h)
    grad_d = s.boundary_gradient(x)

    m = s.codim
    r1 = np.abs(f_keep.delta ** 2 / dt_keep ** 2 - 1.0) / dt_keep
    r2 = np.abs(np.sum(grad_dt * grad_d, axis=1) - d_keep / dt_keep)
    r3 = np.abs(np.linalg.norm(grad_dt, axis=1) - 1.0) / dt_keep
    r4 = np.abs(lap_dt - (m - 1) / dt_keep)

    rows = [ExpansionRow(*(float(v) for v in values))
            for values in zip(dt_keep, r1, r2, r3, r4)]
    return ExpansionReport(rows=rows, excluded=excluded,
                           fd_error=np.maximum(err_grad, err_lap))


def ladder_samples(s: Scenario, rungs: Sequence[float] = (0.2, 0.1, 0.05,
                                                           0.025),
                   per_rung: int = 12) -> np.ndarray:
    """Collar points with δ̃ on each rung and the same angles per rung."""
    points, _ = s.ladder_samples(rungs, per_rung)
    return points
