# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import logging
import math
import typing
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import (ArpackNoConvergence, LinearOperator, eigsh,
                                 splu)

from . import discretization
from ._abc import Scenario
from ._expressions import ScalarField
from .discretization import (GradedGrid, MassMode, SparseOperator,
                             assemble_singular_mass, assemble_stiffness,
                             rayleigh_quotient)
from .errors import (ConvergenceError, IndefiniteOperatorError,
                     SolverError, ThresholdError)
from .weights import WeightTriple, normalize_p, validate_weights


_logger = logging.getLogger('numlab.hardy.solver')

LAMBDA_LIMIT = 1e6

# pencils up to this size are solved densely
DENSE_LIMIT = 1500

# shifted operators up to this size are factorised
DIRECT_LIMIT = 40000

_INNER_TOL = 1e-12


class CGResult(typing.NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float
    converged: bool
    negative_curvature: Optional[np.ndarray] = None


def pcg(S: sparse.spmatrix, b: np.ndarray, *,
        x0: Optional[np.ndarray] = None, tol: float = 1e-10,
        maxiter: int = 10000) -> CGResult:
    """Jacobi-preconditioned conjugate gradients for S x = b.

    Stops early and returns the offending search direction as
    ``negative_curvature`` when pᵀSp ≤ 0, that is when S is not positive
    definite. ``tol`` is relative to ‖b‖.
    """
    diagonal = S.diagonal()
    if np.any(diagonal <= 0.0):
        index = int(np.argmin(diagonal))
        e = np.zeros_like(b)
        e[index] = 1.0
        return CGResult(np.zeros_like(b), 0, math.inf, False, e)
    inv_diag = 1.0 / diagonal

    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - S @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(np.dot(r, z))
    target = tol * float(np.linalg.norm(b))
    residual = float(np.linalg.norm(r))
    for iteration in range(1, maxiter + 1):
        if residual <= target:
            return CGResult(x, iteration - 1, residual, True)
        Sp = S @ p
        curvature = float(np.dot(p, Sp))
        if curvature <= 0.0:
            return CGResult(x, iteration, residual, False, p)
        step = rz / curvature
        x += step * p
        r -= step * Sp
        z = inv_diag * r
        rz_next = float(np.dot(r, z))
        p = z + (rz_next / rz) * p
        rz = rz_next
        residual = float(np.linalg.norm(r))
    return CGResult(x, maxiter, residual, residual <= target)


class MuResult(typing.NamedTuple):
    """Smallest eigenpair of (A + V − λB_η)u = μB_q u on one grid."""
    lam: float
    mu: float
    eigvec: np.ndarray
    residual: float
    iterations: int
    converged: bool
    signature: str
    shift: float
    quantity: str = 'mu'

    def to_row(self) -> Dict[str, Any]:
        return {'lambda': self.lam, self.quantity: self.mu,
                'residual': self.residual, 'iterations': self.iterations}

    def to_json(self) -> Dict[str, Any]:
        return {'lambda': self.lam, 'quantity': self.quantity,
                'value': self.mu, 'residual': self.residual,
                'iterations': self.iterations, 'converged': self.converged,
                'grid': self.signature, 'shift': self.shift}


def _pencil(A: SparseOperator, B_eta: SparseOperator, lam: float,
            potential: Optional[SparseOperator]) -> sparse.csr_matrix:
    K = A.matrix - lam * B_eta.matrix
    if potential is not None:
        K = K + potential.matrix
    return sparse.csr_matrix(K)


def _eigen_residual(K, B, u, mu) -> float:
    Bu = B @ u
    norm = float(np.linalg.norm(Bu))
    return float(np.linalg.norm(K @ u - mu * Bu)) / (norm * max(1.0, abs(mu)))


def spectrum_floor(K: sparse.spmatrix, B: sparse.spmatrix) -> float:
    """Gershgorin lower bound of the pencil (K, B) for a diagonal B > 0.

    The eigenvalues of Ku = μBu are those of D^{-1/2}KD^{-1/2}, D = B.
    """
    d = B.diagonal()
    off = sparse.csr_matrix(B - sparse.diags(d))
    if off.count_nonzero() or np.any(d <= 0.0):
        raise SolverError('the mass operator must be diagonal and positive')
    scale = sparse.diags(1.0 / np.sqrt(d))
    scaled = sparse.csr_matrix(scale @ K @ scale)
    centre = scaled.diagonal()
    radius = np.asarray(abs(scaled).sum(axis=1)).ravel() - np.abs(centre)
    return float(np.min(centre - radius))


def _shifted_inverse(S: sparse.spmatrix,
                     lam: float) -> Callable[[np.ndarray], np.ndarray]:
    if S.shape[0] <= DIRECT_LIMIT:
        return splu(sparse.csc_matrix(S),
                    permc_spec='MMD_AT_PLUS_A').solve

    def solve(b: np.ndarray) -> np.ndarray:
        result = pcg(S, b, tol=_INNER_TOL)
        if result.negative_curvature is not None:
            raise IndefiniteOperatorError(
                f'shifted operator is not positive definite at '
                f'lambda={lam}')
        if not result.converged:
            _logger.debug('inner solve stopped at residual %.3e',
                          result.residual)
        return result.x
    return solve


def min_rayleigh(A: SparseOperator, B_q: SparseOperator,
                 B_eta: SparseOperator, lam: float, tol: float = 1e-8,
                 max_iter: int = 500, *,
                 potential: Optional[SparseOperator] = None,
                 start: Optional[np.ndarray] = None,
                 quantity: str = 'mu') -> MuResult:
    """Smallest μ of (A − λB_η)u = μB_q u by shift-invert Lanczos.

    The shift σ lies below ``spectrum_floor``, so K − σB_q is positive
    definite; it is factorised once (or solved by PCG on large grids) and
    ARPACK finds the eigenvalue nearest σ. Small pencils are solved
    densely. ``max_iter`` bounds the Lanczos restarts and ``iterations``
    counts the shifted solves. The result is converged when the relative
    residual ‖Ku − μBu‖/(‖Bu‖·max(1, |μ|)) is at most ``tol``.
    """
    if tol <= 0.0:
        raise SolverError(f'tolerance must be positive, got {tol}')
    K = _pencil(A, B_eta, lam, potential)
    B = sparse.csr_matrix(B_q.matrix)
    floor = spectrum_floor(K, B)
    shift = floor - 1e-3 * max(1.0, abs(floor))

    solved = True
    if A.dim <= DENSE_LIMIT:
        values, vectors = linalg.eigh(K.toarray(), B.toarray(),
                                      subset_by_index=[0, 0])
        mu, u, iterations = float(values[0]), vectors[:, 0], 1
    else:
        inverse = _shifted_inverse(K - shift * B, lam)
        calls = [0]

        def apply(x: np.ndarray) -> np.ndarray:
            calls[0] += 1
            return inverse(x)

        operator = LinearOperator(K.shape, matvec=apply, dtype=float)
        v0 = np.ones(A.dim) if start is None else \
            np.asarray(start, dtype=float)
        try:
            values, vectors = eigsh(K, k=1, M=B, sigma=shift, which='LM',
                                    v0=v0, tol=0.0, maxiter=max_iter,
                                    OPinv=operator)
            mu, u = float(values[0]), vectors[:, 0]
        except ArpackNoConvergence as exc:
            solved = False
            if len(exc.eigenvalues):
                mu, u = float(exc.eigenvalues[0]), exc.eigenvectors[:, 0]
            else:
                u = v0
                mu = float(u @ (K @ u)) / float(u @ (B @ u))
        iterations = calls[0]

    u = u / math.sqrt(float(u @ (B @ u)))
    if np.sum(u) < 0.0:
        u = -u
    residual = _eigen_residual(K, B, u, mu)
    converged = solved and residual <= tol
    _logger.debug('lambda=%g: mu=%.12g residual=%.3e shift=%g solves=%d',
                  lam, mu, residual, shift, iterations)
    if not converged:
        _logger.warning('min_rayleigh did not converge at lambda=%g: '
                        'residual %.3e after %d solves', lam, residual,
                        iterations)
    return MuResult(lam, mu, u, residual, iterations, converged,
                    A.signature, shift, quantity)


class DiscreteProblem:
    """The discrete quotient of a weight triple on one grid.

    With ``normalized`` the problem is assembled in the p ≡ 1 form
    (1, q/p, η/p) with the potential of the substitution ũ = √p u.
    """

    def __init__(self, scenario: Scenario, weights: WeightTriple,
                 grid: GradedGrid, *, order: int = 4,
                 normalized: bool = False) -> None:
        self.__scenario = scenario
        self.__weights = weights
        self.__grid = grid
        if normalized:
            reduced = normalize_p(weights)
            p, q, eta = (reduced.triple.p, reduced.triple.q,
                         reduced.triple.eta)
            potential: Optional[SparseOperator] = None
            if reduced.extra_potential.sympy_expr != 0:
                potential = assemble_singular_mass(
                    grid, reduced.potential, MassMode.PLAIN, order=order)
        else:
            p, q, eta = weights.p, weights.q, weights.eta
            potential = None
        self.__A = assemble_stiffness(grid, p)
        self.__B_q = assemble_singular_mass(grid, q, MassMode.Q, order=order)
        self.__B_eta = assemble_singular_mass(grid, eta, MassMode.ETA,
                                              order=order)
        self.__potential = potential
        self.__quantity = 'nu' if weights.is_unweighted else 'mu'

    @classmethod
    def build(cls, s: Scenario, w: WeightTriple, n: int, gamma: float = 2.0,
              **kwargs: Any) -> 'DiscreteProblem':
        return cls(s, w, discretization.build_grid(s, n, gamma), **kwargs)

    @property
    def scenario(self) -> Scenario:
        return self.__scenario

    @property
    def weights(self) -> WeightTriple:
        return self.__weights

    @property
    def grid(self) -> GradedGrid:
        return self.__grid

    @property
    def A(self) -> SparseOperator:
        return self.__A

    @property
    def B_q(self) -> SparseOperator:
        return self.__B_q

    @property
    def B_eta(self) -> SparseOperator:
        return self.__B_eta

    @property
    def potential(self) -> Optional[SparseOperator]:
        return self.__potential

    @property
    def plateau(self) -> float:
        return self.__scenario.plateau

    @property
    def quantity(self) -> str:
        return self.__quantity

    def quotient(self, lam: float, u: np.ndarray) -> float:
        return rayleigh_quotient(self.__A, self.__B_q, self.__B_eta, lam, u,
                                 self.__potential)

    def solve(self, lam: float, tol: float = 1e-8, max_iter: int = 500, *,
              start: Optional[np.ndarray] = None) -> MuResult:
        return min_rayleigh(self.__A, self.__B_q, self.__B_eta, lam, tol,
                            max_iter, potential=self.__potential,
                            start=start, quantity=self.__quantity)

    def __repr__(self):
        return (f'<DiscreteProblem {self.__scenario!r} '
                f'{self.__weights!r} {self.__grid!r}>')


class MuCurve:
    """μ_λ along a sorted λ list, with monotonicity and concavity audits."""

    def __init__(self, results: List[MuResult], *,
                 tol: float = 1e-6) -> None:
        self.__results = results
        self.__tol = tol

    @property
    def results(self) -> List[MuResult]:
        return list(self.__results)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([r.lam for r in self.__results])

    @property
    def values(self) -> np.ndarray:
        return np.array([r.mu for r in self.__results])

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.__results)

    def monotonicity_violations(self) -> List[int]:
        """Indices i with μ(λ_{i+1}) > μ(λ_i) beyond the tolerance."""
        mu = self.values
        jumps = np.diff(mu) - self.__tol * np.maximum(1.0, np.abs(mu[:-1]))
        return [int(i) for i in np.flatnonzero(jumps > 0.0)]

    def concavity_violations(self) -> List[int]:
        """Indices i where the chord over i−1 and i+1 is above μ(λ_i)."""
        lam, mu = self.lambdas, self.values
        bad = []
        for i in range(1, lam.size - 1):
            t = (lam[i] - lam[i - 1]) / (lam[i + 1] - lam[i - 1]) \
                if lam[i + 1] > lam[i - 1] else 0.5
            chord = (1.0 - t) * mu[i - 1] + t * mu[i + 1]
            if mu[i] < chord - self.__tol * max(1.0, abs(chord)):
                bad.append(i)
        return bad

    def to_rows(self) -> List[Dict[str, Any]]:
        return [r.to_row() for r in self.__results]

    def __len__(self):
        return len(self.__results)

    def __repr__(self):
        return f'<MuCurve points={len(self.__results)}>'


def mu_curve(problem: DiscreteProblem, lambdas: Sequence[float], *,
             tol: float = 1e-8, max_iter: int = 500,
             warm_start: bool = True) -> MuCurve:
    """Solve for every λ in ``lambdas``; eigenvectors are chained when
    ``warm_start`` is set."""
    lambdas = [float(v) for v in lambdas]
    if lambdas != sorted(lambdas):
        raise SolverError('lambda list must be sorted')
    results: List[MuResult] = []
    start = None
    for lam in lambdas:
        result = problem.solve(lam, tol, max_iter, start=start)
        if not result.converged:
            _logger.warning('lambda=%g did not converge (residual %.3e)',
                            lam, result.residual)
        results.append(result)
        if warm_start:
            start = result.eigvec
    curve = MuCurve(results, tol=max(10.0 * tol, 1e-10))
    monotone = curve.monotonicity_violations()
    if monotone:
        _logger.warning('mu curve is not nonincreasing at indices %s',
                        monotone)
    concave = curve.concavity_violations()
    if concave:
        _logger.warning('mu curve is not concave at indices %s', concave)
    return curve


class ThresholdResult(typing.NamedTuple):
    lam_lo: float
    lam_hi: float
    plateau: float
    tol_mu: float
    evidence: Tuple[MuResult, MuResult]
    grids: Tuple[str, ...]
    quantity: str = 'mu'

    @property
    def width(self) -> float:
        return self.lam_hi - self.lam_lo

    def to_json(self) -> Dict[str, Any]:
        lo, hi = self.evidence
        return {'bracket': [self.lam_lo, self.lam_hi],
                'plateau': self.plateau,
                'tol_mu': self.tol_mu,
                'quantity': self.quantity,
                'evidence': [lo.to_json(), hi.to_json()],
                'grids': list(self.grids)}


def plateau_tolerance(coarse: MuResult, fine: MuResult) -> float:
    """tol_μ = max(2·|μ_n − μ_2n|, 10⁻³) from λ = 0 on two grids."""
    return max(2.0 * abs(coarse.mu - fine.mu), 1e-3)


def find_threshold(problems: Tuple[DiscreteProblem, DiscreteProblem],
                   width_tol: float = 0.5, *, tol: float = 1e-8,
                   max_iter: int = 500) -> ThresholdResult:
    """Bracket λ* on the finer of two grids.

    Parameters
    ----------
    problems: Tuple[DiscreteProblem, DiscreteProblem]
        The same weights on a coarse and a fine grid; their μ at λ = 0
        fixes the plateau tolerance tol_μ.
    width_tol: float
        Requested bracket width.

    Returns
    -------
    ThresholdResult:
        [λ_lo, λ_hi] with μ(λ_lo) ≥ plateau − tol_μ > μ(λ_hi).
    """
    coarse, fine = problems
    report = validate_weights(fine.weights, fine.scenario, 1024)
    report.raise_for_violations()
    if width_tol <= 0.0:
        raise SolverError(f'bracket width must be positive, got {width_tol}')

    def solve(problem, lam, start=None):
        result = problem.solve(lam, tol, max_iter, start=start)
        if not result.converged:
            raise ConvergenceError(
                f'no convergence at lambda={lam} (residual '
                f'{result.residual:.3e})', result)
        return result

    at_zero = solve(fine, 0.0)
    tol_mu = plateau_tolerance(solve(coarse, 0.0), at_zero)
    level = fine.plateau - tol_mu
    _logger.info('plateau %g with tolerance %g', fine.plateau, tol_mu)

    if at_zero.mu >= level:
        lo = at_zero
        step = 1.0
        while True:
            hi = solve(fine, lo.lam + step, lo.eigvec)
            if hi.mu < level:
                break
            lo, step = hi, 2.0 * step
            if lo.lam > LAMBDA_LIMIT:
                raise ThresholdError(
                    f'mu stays on the plateau up to lambda={lo.lam}')
    else:
        hi = at_zero
        step = 1.0
        while True:
            lo = solve(fine, hi.lam - step, hi.eigvec)
            if lo.mu >= level:
                break
            hi, step = lo, 2.0 * step
            if -hi.lam > LAMBDA_LIMIT:
                raise ThresholdError(
                    'plateau not certified at this resolution: mu < '
                    f'{level!r} down to lambda={hi.lam}')

    while hi.lam - lo.lam > width_tol:
        middle = solve(fine, 0.5 * (lo.lam + hi.lam), lo.eigvec)
        if middle.mu >= level:
            lo = middle
        else:
            hi = middle
    _logger.info('threshold bracket [%g, %g]', lo.lam, hi.lam)
    return ThresholdResult(lo.lam, hi.lam, fine.plateau, tol_mu, (lo, hi),
                           (coarse.grid.signature, fine.grid.signature),
                           fine.quantity)


class LocalHardyResult(typing.NamedTuple):
    c: float
    eigvec: np.ndarray
    residual: float
    converged: bool
    signature: str
    beta: float

    def to_json(self) -> Dict[str, Any]:
        return {'c': self.c, 'residual': self.residual,
                'converged': self.converged, 'grid': self.signature,
                'beta': self.beta}


def local_hardy_check(s: Scenario, w: WeightTriple,
                      beta: Optional[float] = None, n: int = 32,
                      gamma: float = 2.0, *, order: int = 4,
                      tol: float = 1e-8,
                      max_iter: int = 500) -> LocalHardyResult:
    """Discrete constant c of the local improved Hardy inequality.

    Minimises (uᵀAu − ((N−k)²/4)·uᵀB_q u)/(uᵀB_log u) over the grid
    restricted to the collar {δ̃ < β}, Dirichlet on its inner boundary.
    """
    beta = s.certified_beta if beta is None else beta
    grid = discretization.build_grid(s, n, gamma, beta=beta)
    A = assemble_stiffness(grid, w.p)
    B_q = assemble_singular_mass(grid, w.q, MassMode.Q, order=order)
    B_log = assemble_singular_mass(grid, ScalarField(1, dim=s.N),
                                   MassMode.LOG, order=order)
    result = min_rayleigh(A, B_log, B_q, s.plateau, tol, max_iter)
    if result.mu <= 0.0:
        _logger.warning('local Hardy constant %g is not positive at '
                        'beta=%g', result.mu, beta)
    return LocalHardyResult(c=result.mu, eigvec=result.eigvec,
                            residual=result.residual,
                            converged=result.converged,
                            signature=grid.signature, beta=beta)
