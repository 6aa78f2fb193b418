# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import enum
import itertools
import logging
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy import sparse

from . import _utils
from ._abc import Scenario
from ._coordinates import GridCoordinates
from ._expressions import ScalarField
from .errors import DiscretizationError


_logger = logging.getLogger('numlab.hardy.discretization')

# quadrature points evaluated per batch
_CHUNK = 1 << 18

# dyadic refinement levels of cells that may touch Σ_k
_SINGULAR_LEVELS = 3


class MassMode(enum.Enum):
    """Integrand of a lumped mass: w·δ⁻², w·δ⁻²|log δ|⁻² or w."""
    Q = 'q'
    ETA = 'eta'
    LOG = 'log'
    PLAIN = 'plain'


class GradedGrid:
    """Tensor grid in the coordinates of a scenario, graded toward Σ_k.

    A cell is active when it lies inside Ω (and inside the collar when
    ``beta`` is set). A node carries a degree of freedom only if every
    cell around it is active, which imposes the Dirichlet condition on the
    staircase boundary of the active region. Nodes identified by a
    periodic axis or by the polar axis share one unknown.
    """

    def __init__(self, scenario: Scenario, axes: List[np.ndarray], *,
                 n: int, gamma: float, beta: Optional[float] = None) -> None:
        self.__scenario = scenario
        self.__coordinates = scenario.grid_coordinates
        self.__axes = [np.asarray(a, dtype=float) for a in axes]
        self.__n = n
        self.__gamma = gamma
        self.__beta = beta

        lower, upper = self.cell_bounds()
        active = scenario.volume_inside(lower, upper)
        if beta is not None:
            active &= self._inside_collar(lower, upper, beta)
        self.__active = active.reshape(self.cell_shape)

        canonical = self._canonical_nodes().ravel()
        free = np.ones(canonical.size, dtype=bool)
        np.logical_and.at(free, canonical, self._free_nodes().ravel())
        free = free[canonical]
        self.__nodes = np.unique(canonical[free])
        lookup = np.full(canonical.size, -1, dtype=np.int64)
        lookup[self.__nodes] = np.arange(self.__nodes.size)
        self.__free = free.reshape(self.node_shape)
        self.__index = lookup[canonical].reshape(self.node_shape)

    def _has_pole(self) -> bool:
        polar = self.__coordinates.polar_axis
        return polar is not None and self.__axes[polar][0] == 0.0

    def _free_nodes(self) -> np.ndarray:
        coordinates = self.__coordinates
        padded = self.__active
        for axis in range(self.dim):
            width = [(0, 0)] * self.dim
            if axis in coordinates.periodic_axes:
                width[axis] = (1, 1)
                padded = np.pad(padded, width, mode='wrap')
            elif axis == coordinates.polar_axis and self._has_pole():
                width[axis] = (1, 0)
                padded = np.pad(padded, width, mode='edge')
                width[axis] = (0, 1)
                padded = np.pad(padded, width, constant_values=False)
            else:
                width[axis] = (1, 1)
                padded = np.pad(padded, width, constant_values=False)
        free = np.ones(self.node_shape, dtype=bool)
        for corner in itertools.product((0, 1), repeat=self.dim):
            window = tuple(slice(c, c + s) for c, s in
                           zip(corner, self.node_shape))
            free &= padded[window]
        return free

    def _canonical_nodes(self) -> np.ndarray:
        coordinates = self.__coordinates
        canonical = np.arange(int(np.prod(self.node_shape))).reshape(
            self.node_shape)
        for axis in coordinates.periodic_axes:
            last = [slice(None)] * self.dim
            first = [slice(None)] * self.dim
            last[axis], first[axis] = -1, 0
            canonical[tuple(last)] = canonical[tuple(first)]
        if self._has_pole():
            polar = coordinates.polar_axis
            collapsed = coordinates.collapsed_axis
            face = [slice(None)] * self.dim
            face[polar] = 0
            pole = canonical[tuple(face)]
            along = collapsed - (1 if polar < collapsed else 0)
            pole[...] = np.take(pole, [0], axis=along)
        return canonical

    def _inside_collar(self, lower: np.ndarray, upper: np.ndarray,
                       beta: float) -> np.ndarray:
        inside = np.ones(lower.shape[0], dtype=bool)
        for corner in itertools.product((0, 1), repeat=self.dim):
            pick = np.array(corner, dtype=bool)
            points = self.__coordinates.to_cartesian(
                np.where(pick, upper, lower))
            inside &= self.__scenario.collar_mask(points, beta)
        return inside

    @property
    def scenario(self) -> Scenario:
        return self.__scenario

    @property
    def coordinates(self) -> GridCoordinates:
        return self.__coordinates

    @property
    def axes(self) -> List[np.ndarray]:
        return [a.copy() for a in self.__axes]

    @property
    def dim(self) -> int:
        return len(self.__axes)

    @property
    def n(self) -> int:
        return self.__n

    @property
    def gamma(self) -> float:
        return self.__gamma

    @property
    def beta(self) -> Optional[float]:
        return self.__beta

    @property
    def node_shape(self) -> Tuple[int, ...]:
        return tuple(a.size for a in self.__axes)

    @property
    def cell_shape(self) -> Tuple[int, ...]:
        return tuple(a.size - 1 for a in self.__axes)

    @property
    def active(self) -> np.ndarray:
        return self.__active.copy()

    @property
    def free(self) -> np.ndarray:
        return self.__free.copy()

    @property
    def index(self) -> np.ndarray:
        """Node multi-index to unknown, −1 on Dirichlet nodes."""
        return self.__index.copy()

    @property
    def size(self) -> int:
        """Number of interior unknowns."""
        return int(self.__nodes.size)

    @property
    def signature(self) -> str:
        return _utils.digest(self.__active, *self.__axes)

    def spacings(self) -> List[np.ndarray]:
        return [np.diff(a) for a in self.__axes]

    def cell_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Lower and upper grid coordinates of every cell in C order."""
        lows = np.meshgrid(*[a[:-1] for a in self.__axes], indexing='ij')
        highs = np.meshgrid(*[a[1:] for a in self.__axes], indexing='ij')
        return (np.stack([g.ravel() for g in lows], axis=1),
                np.stack([g.ravel() for g in highs], axis=1))

    def cell_volumes(self) -> np.ndarray:
        """Physical volumes ∫J dy of the cells."""
        volumes = np.ones(self.cell_shape)
        for axis, h in enumerate(self.spacings()):
            shape = [1] * self.dim
            shape[axis] = h.size
            volumes = volumes * h.reshape(shape)
        lower, upper = self.cell_bounds()
        # J is at most linear in each coordinate, so the midpoint is exact
        jacobian = self.__coordinates.jacobian(0.5 * (lower + upper))
        return volumes * jacobian.reshape(self.cell_shape)

    def node_points(self) -> np.ndarray:
        """Cartesian points of the interior nodes, ordered by unknown."""
        mesh = np.meshgrid(*self.__axes, indexing='ij')
        y = np.stack([g.ravel()[self.__nodes] for g in mesh], axis=1)
        return self.__coordinates.to_cartesian(y)

    def interpolate(self, f: _utils.Field) -> np.ndarray:
        """Nodal values of ``f`` at the interior nodes."""
        return np.asarray(f(self.node_points()), dtype=float)

    def to_json(self) -> Dict[str, Any]:
        return {'scenario': self.__scenario.to_config(),
                'n': self.__n,
                'gamma': self.__gamma,
                'beta': self.__beta,
                'node_shape': list(self.node_shape),
                'active_cells': int(np.sum(self.__active)),
                'unknowns': self.size,
                'min_spacing': [float(np.min(h)) for h in self.spacings()],
                'signature': self.signature}

    def __repr__(self):
        return (f'<GradedGrid n={self.__n} gamma={self.__gamma} '
                f'unknowns={self.size}>')


def build_grid(s: Scenario, n: int, gamma: float = 2.0, *,
               beta: Optional[float] = None,
               require_collar: bool = True) -> GradedGrid:
    """Build the graded tensor grid of ``s``.

    Parameters
    ----------
    s: Scenario
        The geometry; it supplies the node vectors and the membership
        test of cells.
    n: int
        Cells per axis (at least 8).
    gamma: float
        Grading exponent in [1, 4]; transverse nodes sit at (j/n)^γ.
    beta: Optional[float]
        Restrict the active region to the collar {δ̃ < β}.
    require_collar: bool
        Reject grids with fewer than four active cells inside the collar.

    Returns
    -------
    GradedGrid:
        The grid with its interior index map.
    """
    if n < 8:
        raise DiscretizationError(f'need at least 8 cells per axis, got {n}')
    if not 1.0 <= gamma <= 4.0:
        raise DiscretizationError(f'grading exponent must lie in [1, 4], '
                                  f'got {gamma}')
    grid = GradedGrid(s, s.grid_axes(n, gamma), n=n, gamma=gamma, beta=beta)

    lower, upper = grid.cell_bounds()
    centers = grid.coordinates.to_cartesian(0.5 * (lower + upper))
    collar = s.collar_mask(centers, beta)
    in_collar = int(np.sum(collar & grid.active.ravel()))
    if require_collar and in_collar < 4:
        raise DiscretizationError(
            f'only {in_collar} active cells inside the collar at n={n}; '
            f'refine the grid')
    if grid.size == 0:
        raise DiscretizationError(f'no interior unknowns at n={n}')
    _logger.info('built %r for %r', grid, s)
    return grid


class SparseOperator:
    """Symmetric sparse matrix acting on the interior unknowns of a grid."""

    def __init__(self, matrix: sparse.spmatrix, *, name: str,
                 signature: str) -> None:
        self.__matrix = sparse.csr_matrix(matrix)
        self.__matrix.sum_duplicates()
        self.__name = name
        self.__signature = signature

    @classmethod
    def diagonal_of(cls, values: np.ndarray, *, name: str,
                    signature: str) -> 'SparseOperator':
        return cls(sparse.diags(values, format='csr'), name=name,
                   signature=signature)

    @property
    def matrix(self) -> sparse.csr_matrix:
        return self.__matrix

    @property
    def name(self) -> str:
        return self.__name

    @property
    def signature(self) -> str:
        return self.__signature

    @property
    def dim(self) -> int:
        return self.__matrix.shape[0]

    def diagonal(self) -> np.ndarray:
        return self.__matrix.diagonal()

    def is_symmetric(self) -> bool:
        difference = self.__matrix - self.__matrix.T
        return difference.count_nonzero() == 0

    def triplets(self) -> Iterator[Tuple[int, int, float]]:
        coo = self.__matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for i in order:
            yield int(coo.row[i]), int(coo.col[i]), float(coo.data[i])

    def quadratic(self, u: np.ndarray) -> float:
        return float(u @ (self.__matrix @ u))

    def __matmul__(self, u):
        return self.__matrix @ u

    def __repr__(self):
        return (f'<SparseOperator {self.__name} dim={self.dim} '
                f'nnz={self.__matrix.nnz}>')


def _evaluate(weight: ScalarField, s: Scenario, points: np.ndarray
              ) -> Tuple[np.ndarray, Any]:
    fields = s.fields(points)
    return weight(points, fields), fields


def _edge_midpoints(mesh: List[np.ndarray], lo: List[slice],
                    hi: List[slice], keep: np.ndarray) -> np.ndarray:
    start = np.stack([m[tuple(lo)].ravel()[keep] for m in mesh], axis=1)
    stop = np.stack([m[tuple(hi)].ravel()[keep] for m in mesh], axis=1)
    return 0.5 * (start + stop)


def assemble_stiffness(g: GradedGrid, p: ScalarField) -> SparseOperator:
    """Finite-volume discretisation of ∫p∇u·∇v on the active cells.

    Every grid edge carries p at its midpoint times the area of its dual
    face inside the active cells, divided by its length. Edges to a
    Dirichlet node only add to the diagonal.
    """
    s = g.scenario
    h = g.spacings()
    active = g.active.astype(float)
    index = g.index
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    axes = g.axes
    mesh = np.meshgrid(*axes, indexing='ij')
    # dual-face centroids sit a quarter of the spacing jump off the node
    centroid_axes = []
    for y, step in zip(axes, h):
        offset = np.zeros(y.size)
        offset[:-1] += 0.25 * step
        offset[1:] -= 0.25 * step
        centroid_axes.append(y + offset)

    for axis in range(g.dim):
        # dual face area of each edge along ``axis``
        face = active.copy()
        for other in range(g.dim):
            if other == axis:
                continue
            shape = [1] * g.dim
            shape[other] = h[other].size
            face = face * (0.5 * h[other]).reshape(shape)
            pad = [(0, 0)] * g.dim
            pad[other] = (1, 1)
            padded = np.pad(face, pad)
            lo = [slice(None)] * g.dim
            hi = [slice(None)] * g.dim
            lo[other] = slice(None, -1)
            hi[other] = slice(1, None)
            face = padded[tuple(lo)] + padded[tuple(hi)]

        shape = [1] * g.dim
        shape[axis] = h[axis].size
        coef = face / h[axis].reshape(shape)

        lo = [slice(None)] * g.dim
        hi = [slice(None)] * g.dim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a = index[tuple(lo)].ravel()
        b = index[tuple(hi)].ravel()
        coef = coef.ravel()
        # edges inside one merged node carry no energy
        keep = (coef > 0.0) & ((a >= 0) | (b >= 0)) & (a != b)
        a, b, coef = a[keep], b[keep], coef[keep]

        midpoints = _edge_midpoints(mesh, lo, hi, keep)
        shifted = list(centroid_axes)
        shifted[axis] = axes[axis]
        centroids = _edge_midpoints(np.meshgrid(*shifted, indexing='ij'),
                                    lo, hi, keep)
        metric = g.coordinates.stiffness_factors(centroids)[:, axis]
        x_mid = g.coordinates.to_cartesian(midpoints)
        if p.is_constant:
            p_mid = p(x_mid)
        else:
            p_mid, _ = _evaluate(p, s, x_mid)
        coef = coef * p_mid * metric

        both = (a >= 0) & (b >= 0)
        for node in (a, b):
            mask = node >= 0
            rows.append(node[mask])
            cols.append(node[mask])
            vals.append(coef[mask])
        rows += [a[both], b[both]]
        cols += [b[both], a[both]]
        vals += [-coef[both], -coef[both]]

    n = g.size
    matrix = sparse.coo_matrix((np.concatenate(vals),
                                (np.concatenate(rows), np.concatenate(cols))),
                               shape=(n, n))
    operator = SparseOperator(matrix, name='A', signature=g.signature)
    _logger.debug('assembled %r', operator)
    return operator


def _reference_rule(order: int, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    nodes = np.stack([m.ravel() for m in
                      np.meshgrid(*([x] * dim), indexing='ij')], axis=1)
    weights = np.prod(np.stack([m.ravel() for m in
                                np.meshgrid(*([w] * dim), indexing='ij')],
                               axis=1), axis=1)
    return nodes, weights


def _integrand(weight: ScalarField, mode: MassMode, s: Scenario,
               points: np.ndarray) -> np.ndarray:
    values, fields = _evaluate(weight, s, points)
    delta = fields.delta
    if mode is MassMode.PLAIN:
        return values
    if np.any(delta <= 0.0):
        raise DiscretizationError('a quadrature node lies on Σ_k')
    values = values / delta ** 2
    if mode is MassMode.LOG:
        values = values / np.log(delta) ** 2
    return values


def _corner_basis(t: np.ndarray) -> np.ndarray:
    # (Q, 2^N) values of the multilinear corner functions at reference points
    dim = t.shape[1]
    columns = []
    for corner in itertools.product((0, 1), repeat=dim):
        pick = np.array(corner, dtype=bool)
        columns.append(np.prod(np.where(pick, t, 1.0 - t), axis=1))
    return np.stack(columns, axis=1)


def _box_moments(weight: ScalarField, mode: MassMode, s: Scenario,
                 coordinates: GridCoordinates,
                 lower: np.ndarray, upper: np.ndarray,
                 box_lo: np.ndarray, box_hi: np.ndarray,
                 order: int) -> np.ndarray:
    """∫ φ_c·g over reference sub-boxes of cells, one row per box."""
    nodes, weights = _reference_rule(order, lower.shape[1])
    per_chunk = max(1, _CHUNK // nodes.shape[0])
    out = np.empty((lower.shape[0], 2 ** lower.shape[1]))
    for start in range(0, lower.shape[0], per_chunk):
        sl = slice(start, start + per_chunk)
        span = box_hi[sl] - box_lo[sl]
        t = box_lo[sl][:, None, :] + span[:, None, :] * nodes[None, :, :]
        x = lower[sl][:, None, :] + (upper[sl] - lower[sl])[:, None, :] * t
        m, q, dim = x.shape
        y = x.reshape(m * q, dim)
        g = _integrand(weight, mode, s, coordinates.to_cartesian(y))
        g = (g * coordinates.jacobian(y)).reshape(m, q)
        basis = _corner_basis(t.reshape(m * q, dim)).reshape(m, q, -1)
        volume = np.prod(upper[sl] - lower[sl], axis=1) * np.prod(span, axis=1)
        out[sl] = np.einsum('mq,q,mqc->mc', g, weights, basis) \
            * volume[:, None]
    return out


def _singular_cells(s: Scenario, coordinates: GridCoordinates,
                    lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    centers = coordinates.to_cartesian(0.5 * (lower + upper))
    reach = np.zeros(lower.shape[0])
    for corner in itertools.product((0, 1), repeat=lower.shape[1]):
        pick = np.array(corner, dtype=bool)
        points = coordinates.to_cartesian(np.where(pick, upper, lower))
        reach = np.maximum(reach, np.linalg.norm(points - centers, axis=1))
    return s.fields(centers).delta <= reach


def _cell_moments(weight: ScalarField, mode: MassMode, s: Scenario,
                  coordinates: GridCoordinates,
                  lower: np.ndarray, upper: np.ndarray,
                  order: int) -> np.ndarray:
    dim = lower.shape[1]
    moments = np.zeros((lower.shape[0], 2 ** dim))
    singular = _singular_cells(s, coordinates, lower, upper) \
        if mode is not MassMode.PLAIN else np.zeros(lower.shape[0], bool)

    regular = ~singular
    if np.any(regular):
        ones = np.ones((int(np.sum(regular)), dim))
        moments[regular] = _box_moments(weight, mode, s, coordinates,
                                        lower[regular], upper[regular],
                                        0.0 * ones, ones, order)
    if not np.any(singular):
        return moments

    # Σ-adjacent cells: split boxes near Σ_k dyadically, order doubled
    owner = np.flatnonzero(singular)
    box_lo = np.zeros((owner.size, dim))
    box_hi = np.ones((owner.size, dim))
    children = np.array(list(itertools.product((0.0, 0.5), repeat=dim)))
    for level in range(_SINGULAR_LEVELS + 1):
        x_lo = lower[owner] + (upper[owner] - lower[owner]) * box_lo
        x_hi = lower[owner] + (upper[owner] - lower[owner]) * box_hi
        near = _singular_cells(s, coordinates, x_lo, x_hi)
        if level == _SINGULAR_LEVELS:
            near[:] = False
        done = ~near
        if np.any(done):
            part = _box_moments(weight, mode, s, coordinates,
                                lower[owner[done]],
                                upper[owner[done]], box_lo[done],
                                box_hi[done], 2 * order)
            np.add.at(moments, owner[done], part)
        if not np.any(near):
            break
        span = (box_hi[near] - box_lo[near])[:, None, :]
        base = box_lo[near][:, None, :] + span * children[None, :, :]
        owner = np.repeat(owner[near], children.shape[0])
        box_lo = base.reshape(-1, dim)
        box_hi = (base + 0.5 * span).reshape(-1, dim)
    return moments


def assemble_singular_mass(g: GradedGrid, w: ScalarField,
                           mode: MassMode = MassMode.Q, *,
                           order: int = 4) -> SparseOperator:
    """Lumped mass with entries ∫φ_i·w·δ⁻², or its log or plain variant.

    φ_i is the multilinear hat function of node i, so entries are row sums
    of the consistent mass. Cells that may touch Σ_k are integrated on
    dyadically refined sub-boxes with twice the Gauss order.
    """
    mode = MassMode(mode)
    s = g.scenario
    lower, upper = g.cell_bounds()
    active = g.active.ravel()
    lower, upper = lower[active], upper[active]
    cells = np.argwhere(g.active)

    moments = _cell_moments(w, mode, s, g.coordinates, lower, upper,
                            order)
    if not np.all(np.isfinite(moments)):
        bad = int(np.sum(~np.all(np.isfinite(moments), axis=1)))
        raise DiscretizationError(f'non-finite quadrature on {bad} cells')

    index = g.index
    diagonal = np.zeros(g.size)
    for c, corner in enumerate(itertools.product((0, 1), repeat=g.dim)):
        nodes = index[tuple((cells + np.array(corner)).T)]
        mask = nodes >= 0
        diagonal += np.bincount(nodes[mask], weights=moments[mask, c],
                                minlength=g.size)
    operator = SparseOperator.diagonal_of(diagonal, name=f'B_{mode.value}',
                                          signature=g.signature)
    _logger.debug('assembled %r', operator)
    return operator


def rayleigh_quotient(A: SparseOperator, B_q: SparseOperator,
                      B_eta: SparseOperator, lam: float, u: np.ndarray,
                      potential: Optional[SparseOperator] = None) -> float:
    """(uᵀAu − λ·uᵀB_ηu)/(uᵀB_q u), plus uᵀVu for a potential V."""
    u = np.asarray(u, dtype=float)
    if u.shape != (A.dim,) or B_q.dim != A.dim or B_eta.dim != A.dim:
        raise DiscretizationError(
            f'dimension mismatch: u has shape {u.shape}, operators act on '
            f'{A.dim} unknowns')
    denominator = B_q.quadratic(u)
    if denominator <= 0.0:
        raise DiscretizationError('zero denominator in the Rayleigh quotient')
    numerator = A.quadratic(u) - lam * B_eta.quadratic(u)
    if potential is not None:
        numerator += potential.quadratic(u)
    return numerator / denominator
