# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import enum
import heapq
import logging
import math
import typing
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import sympy
from scipy import integrate, optimize
from scipy.stats import qmc

from ._abc import Scenario
from ._expressions import ScalarField
from .errors import WeightError, WeightHypothesisError


_logger = logging.getLogger('numlab.hardy.weights')

Expression = Union[str, float, int, sympy.Expr]


class WeightTriple:
    """The weights (p, q, η) of the quotient.

    ∫p|∇u|² − λ∫ηδ⁻²u² over ∫qδ⁻²u². Each weight is a
    closed-form expression over x1..xN and the distance variables of
    the scenario.
    """

    def __init__(self, p: ScalarField, q: ScalarField,
                 eta: ScalarField) -> None:
        if not p.dim == q.dim == eta.dim:
            raise WeightError('weights are defined in different dimensions')
        self.__p = p
        self.__q = q
        self.__eta = eta

    @classmethod
    def from_strings(cls, *, p: Expression = '1', q: Expression = '1',
                     eta: Expression = 'delta**2',
                     dim: int = 3) -> 'WeightTriple':
        return cls(ScalarField(p, dim=dim), ScalarField(q, dim=dim),
                   ScalarField(eta, dim=dim))

    @classmethod
    def from_config(cls, block: Union[str, Mapping[str, Any]], *,
                    dim: int) -> 'WeightTriple':
        if block == 'unweighted':
            return cls.unweighted(dim)
        get = block.get  # type: ignore
        return cls.from_strings(p=get('p', '1'), q=get('q', '1'),
                                eta=get('eta', 'delta**2'), dim=dim)

    @classmethod
    def unweighted(cls, dim: int) -> 'WeightTriple':
        """p = q ≡ 1 and η = δ²; λ then multiplies the plain L² mass."""
        return cls.from_strings(p='1', q='1', eta='delta**2', dim=dim)

    @property
    def p(self) -> ScalarField:
        return self.__p

    @property
    def q(self) -> ScalarField:
        return self.__q

    @property
    def eta(self) -> ScalarField:
        return self.__eta

    @property
    def dim(self) -> int:
        return self.__p.dim

    @property
    def is_unweighted(self) -> bool:
        delta = sympy.Symbol('delta', real=True)
        return (self.__p.sympy_expr == 1 and self.__q.sympy_expr == 1
                and sympy.simplify(self.__eta.sympy_expr - delta ** 2) == 0)

    def with_eta(self, eta: ScalarField) -> 'WeightTriple':
        return WeightTriple(self.__p, self.__q, eta)

    def scaled_eta(self, factor: float) -> 'WeightTriple':
        return self.with_eta(self.__eta.scaled(factor))

    def evaluate(self, s: Scenario, points: np.ndarray,
                 fields: Optional[Any] = None
                 ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        points = np.atleast_2d(points)
        if fields is None and any(w.depends_on_distances
                                  for w in (self.__p, self.__q, self.__eta)):
            fields = s.fields(points)
        return (self.__p(points, fields), self.__q(points, fields),
                self.__eta(points, fields))

    def to_config(self) -> Dict[str, str]:
        return {'p': self.__p.expression, 'q': self.__q.expression,
                'eta': self.__eta.expression}

    def __repr__(self):
        return (f'<WeightTriple p={self.__p.expression} '
                f'q={self.__q.expression} eta={self.__eta.expression}>')


class Violation(typing.NamedTuple):
    condition: str
    message: str
    worst: Tuple[float, ...]


class ValidationReport:
    """Outcome of checking the standing hypotheses on the weights."""

    def __init__(self, *, violations: List[Violation], eta_constant: float,
                 max_q_over_p: float, argmax_sigma: np.ndarray,
                 samples: int) -> None:
        self.__violations = violations
        self.__eta_constant = eta_constant
        self.__max_q_over_p = max_q_over_p
        self.__argmax_sigma = argmax_sigma
        self.__samples = samples

    @property
    def ok(self) -> bool:
        return not self.__violations

    @property
    def violations(self) -> List[Violation]:
        return list(self.__violations)

    @property
    def conditions(self) -> List[str]:
        return [v.condition for v in self.__violations]

    @property
    def eta_constant(self) -> float:
        """Fitted C in η ≤ Cδ over the collar samples."""
        return self.__eta_constant

    @property
    def max_q_over_p(self) -> float:
        return self.__max_q_over_p

    @property
    def argmax_sigma(self) -> np.ndarray:
        """Σ_k parameters where q/p attains its sampled maximum."""
        return self.__argmax_sigma.copy()

    @property
    def samples(self) -> int:
        return self.__samples

    def raise_for_violations(self) -> None:
        if self.__violations:
            details = '; '.join(f'{v.condition}: {v.message}'
                                for v in self.__violations)
            raise WeightHypothesisError(f'invalid weights: {details}', self)

    def to_json(self) -> Dict[str, Any]:
        return {'ok': self.ok,
                'eta_constant': self.__eta_constant,
                'max_q_over_p': self.__max_q_over_p,
                'samples': self.__samples,
                'violations': [{'condition': v.condition,
                                'message': v.message,
                                'worst': list(v.worst)}
                               for v in self.__violations]}

    def __repr__(self):
        return (f'<ValidationReport ok={self.ok} '
                f'violations={self.conditions}>')


def sigma_grid(s: Scenario, per_axis: int) -> np.ndarray:
    """Tensor grid of Σ_k parameters, including the endpoints of open
    boxes and excluding the duplicated endpoint of periodic ones."""
    axes = []
    for a, b in s.sigma_domain():
        axes.append(np.linspace(a, b, per_axis,
                                endpoint=not s.sigma_periodic))
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.stack([m.ravel() for m in mesh], axis=1)


def validate_weights(w: WeightTriple, s: Scenario, n_samples: int = 4096,
                     *, seed: int = 0, tol: float = 1e-8) -> ValidationReport:
    """Check positivity, the vanishing of η on Σ_k and max_{Σ_k} q/p = 1.

    Parameters
    ----------
    w: WeightTriple
        The weights to check.
    s: Scenario
        Geometry supplying Ω, Σ_k and the collar.
    n_samples: int
        Number of quasi-random samples of Ω and of the collar.

    Returns
    -------
    ValidationReport:
        Violations name the condition and the worst sample; the fitted
        constant C of η ≤ Cδ is reported even for valid weights.
    """
    if w.dim != s.N:
        raise WeightError(f'weights are defined on R^{w.dim}, the scenario '
                          f'lives in R^{s.N}')

    lower, upper = s.bounding_box()
    u = qmc.Halton(d=s.N, scramble=False).random(n_samples + 1)[1:]
    u = (u + np.random.default_rng(seed).random(s.N)) % 1.0
    interior = lower + (upper - lower) * u
    interior = interior[s.contains(interior)]
    collar = s.sample_collar(n_samples, seed=seed)
    sigma_params = sigma_grid(s, 2048 if s.k == 1 else 64)
    on_sigma = s.sigma_points(sigma_params)

    violations: List[Violation] = []

    def worst_of(points, values, largest=False):
        index = int(np.argmax(values) if largest else np.argmin(values))
        return tuple(float(v) for v in points[index])

    bulk = np.concatenate([interior, collar, on_sigma])
    p, q, eta = w.evaluate(s, bulk)
    for name, values in (('p > 0', p), ('q > 0', q)):
        if not np.all(values > 0.0):
            violations.append(Violation(
                name, f'minimum {float(np.min(values))!r}',
                worst_of(bulk, values)))

    f_in = s.fields(interior)
    off_sigma = f_in.delta > 1e-6
    _, _, eta_in = w.evaluate(s, interior, f_in)
    if not np.all(eta_in[off_sigma] > 0.0):
        violations.append(Violation(
            'eta > 0 off Sigma',
            f'minimum {float(np.min(eta_in[off_sigma]))!r} away from Σ_k',
            worst_of(interior[off_sigma], eta_in[off_sigma])))

    p_s, q_s, eta_s = w.evaluate(s, on_sigma)
    if np.max(np.abs(eta_s)) > tol:
        violations.append(Violation(
            'eta = 0 on Sigma',
            f'|eta| reaches {float(np.max(np.abs(eta_s)))!r} on Σ_k',
            worst_of(on_sigma, np.abs(eta_s), largest=True)))

    ratio = q_s / p_s
    max_ratio = float(np.max(ratio))
    argmax = sigma_params[np.abs(ratio - max_ratio) <= tol]
    if abs(max_ratio - 1.0) > tol:
        violations.append(Violation(
            'max q/p = 1', f'sampled maximum of q/p on Σ_k is {max_ratio!r}',
            worst_of(on_sigma, ratio, largest=True)))

    f_c = s.fields(collar)
    _, _, eta_c = w.evaluate(s, collar, f_c)
    eta_constant = float(np.max(eta_c / f_c.delta))

    report = ValidationReport(violations=violations,
                              eta_constant=eta_constant,
                              max_q_over_p=max_ratio, argmax_sigma=argmax,
                              samples=int(bulk.shape[0]))
    if violations:
        _logger.info('weight validation failed: %s', report.conditions)
    return report


class Verdict(enum.Enum):
    """Classification of the attainment integral I_k."""
    FINITE = 'finite'
    DIVERGENT = 'divergent'
    INDETERMINATE = 'indeterminate'


class AttainmentResult(typing.NamedTuple):
    value: float
    verdict: Verdict
    local_exponent: float
    quadrature_error: float
    zeros: Tuple[Tuple[float, ...], ...]
    ladder: Tuple[Tuple[float, float], ...]

    @property
    def attained(self) -> bool:
        """Whether μ_{λ*} is attained, as far as I_k can tell."""
        return self.verdict is Verdict.FINITE

    def to_json(self) -> Dict[str, Any]:
        finite = self.verdict is Verdict.FINITE
        return {'value': self.value if finite else self.verdict.value,
                'verdict': self.verdict.value,
                'exponent': (None if math.isnan(self.local_exponent)
                             else self.local_exponent),
                'error': self.quadrature_error,
                'zeros': [list(z) for z in self.zeros],
                'ladder': [list(rung) for rung in self.ladder]}


_GAUSS = {order: np.polynomial.legendre.leggauss(order) for order in (10, 20)}

PARTIAL_INTEGRAL_CAP = 1e6


def _gauss(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
           order: int) -> float:
    nodes, weights = _GAUSS[order]
    half = 0.5 * (b - a)
    return float(half * np.dot(weights, f(0.5 * (a + b) + half * nodes)))


def adaptive_gauss(f: Callable[[np.ndarray], np.ndarray],
                   breakpoints: List[float], tol: float, *,
                   max_intervals: int = 20000) -> Tuple[float, float, int]:
    """Adaptive Gauss-Legendre quadrature over consecutive breakpoints.

    The interval with the largest error estimate (20- vs 10-point rule) is
    bisected until the summed estimate drops below ``tol``. The final sum
    runs over intervals in order of their left endpoint.
    """
    heap: List[Tuple[float, int, float, float, float]] = []
    counter = 0
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b <= a:
            continue
        fine = _gauss(f, a, b, 20)
        err = abs(fine - _gauss(f, a, b, 10))
        heap.append((-err, counter, a, b, fine))
        counter += 1
    heapq.heapify(heap)
    total = sum(-item[0] for item in heap)

    while heap and total > tol and len(heap) < max_intervals:
        worst, _, a, b, _ = heapq.heappop(heap)
        total += worst
        mid = 0.5 * (a + b)
        for lo, hi in ((a, mid), (mid, b)):
            fine = _gauss(f, lo, hi, 20)
            err = abs(fine - _gauss(f, lo, hi, 10))
            heapq.heappush(heap, (-err, counter, lo, hi, fine))
            total += err
            counter += 1

    pieces = sorted(heap, key=lambda item: item[2])
    value = float(math.fsum(item[4] for item in pieces))
    error = math.fsum(-item[0] for item in pieces)
    return value, error, len(pieces)


def _contact_function(w: WeightTriple, s: Scenario
                      ) -> Callable[[np.ndarray], np.ndarray]:
    def g(params):
        points = s.sigma_points(np.atleast_2d(params))
        p, q, _ = w.evaluate(s, points)
        return 1.0 - q / p
    return g


def _fit_exponent(radii: np.ndarray, values: np.ndarray) -> Tuple[float, bool]:
    if np.any(~np.isfinite(values)) or np.any(values <= 0.0):
        return float('nan'), False
    slope, _ = np.polyfit(np.log(radii), np.log(values), 1)
    local = np.diff(np.log(values)) / np.diff(np.log(radii))
    well_conditioned = bool(np.max(local) - np.min(local) < 0.2)
    return float(slope), well_conditioned


def attainment_integral(w: WeightTriple, s: Scenario,
                        tol: float = 1e-10) -> AttainmentResult:
    """Evaluate I_k = ∫_{Σ_k} dσ/√(1 − q/p) and classify it.

    Zeros of 1 − q/p are located on a fine parameter grid and refined;
    at each the contact order m is fitted by log-log regression. For an
    isolated zero the integrand behaves like |s|^{−m/2} in k dimensions,
    so the integral diverges iff m ≥ 2k. A zero whose fit is unstable
    gives an indeterminate verdict. The partial integrals with the zeros
    cut out at radius r are always reported as a ladder.
    """
    g = _contact_function(w, s)
    if s.k == 1:
        return _attainment_curve(g, s, tol)
    return _attainment_patch(g, s, tol)


def _touching_everywhere(s: Scenario) -> AttainmentResult:
    """q = p on all of Σ_k, so the integrand is infinite everywhere.

    The ladder holds the collar form of I_k truncated at ρ ≥ r: with
    1 − q/p ≡ 0 it is ∫_{Σ_k}∫_r^1 dρ/ρ dσ = |Σ_k|·log(1/r).
    """
    _logger.info('q/p = 1 on all of Σ_k')
    ladder = tuple((float(r), float(s.sigma_measure * math.log(1.0 / r)))
                   for r in np.logspace(-1, -6, 6))
    return AttainmentResult(math.inf, Verdict.DIVERGENT, math.nan, math.nan,
                            (), ladder)


def _attainment_curve(g: Callable[[np.ndarray], np.ndarray], s: Scenario,
                      tol: float) -> AttainmentResult:
    (a, b), = s.sigma_domain()
    length = b - a
    grid = np.linspace(a, b, 4096, endpoint=not s.sigma_periodic)
    values = g(grid[:, None])
    scale = max(1.0, float(np.max(np.abs(values))))
    if np.min(values) < -1e-8 * scale:
        index = int(np.argmin(values))
        raise WeightHypothesisError(
            f'q/p exceeds 1 on Σ_k: 1 - q/p = {float(values[index])!r} at '
            f'parameter {float(grid[index])!r}')
    if np.all(values <= 1e-6 * scale):
        return _touching_everywhere(s)

    step = grid[1] - grid[0]
    zeros: List[float] = []
    candidates = np.flatnonzero(values <= 1e-6 * scale)
    for index in candidates:
        left = values[index - 1] if index > 0 or s.sigma_periodic else np.inf
        right = (values[(index + 1) % grid.size]
                 if index + 1 < grid.size or s.sigma_periodic else np.inf)
        if values[index] > left or values[index] > right:
            continue
        lo = grid[index] - step
        hi = grid[index] + step
        if not s.sigma_periodic:
            lo, hi = max(lo, a), min(hi, b)
        found = optimize.minimize_scalar(
            lambda t: float(g(np.array([[t]]))[0]), bounds=(lo, hi),
            method='bounded', options={'xatol': 1e-12})
        t0 = float(found.x)
        if float(g(np.array([[t0]]))[0]) <= 1e-12 * scale:
            if not any(abs(t0 - z) < 2 * step for z in zeros):
                zeros.append(t0)

    def integrand(t):
        params = t[:, None]
        with np.errstate(divide='ignore', invalid='ignore'):
            out = s.sigma_density(params) / np.sqrt(np.maximum(g(params),
                                                                0.0))
        return np.where(np.isfinite(out), out, 0.0)

    exponents, conditioned = [], True
    radii = length * np.logspace(-2, -4, 7)
    for z in zeros:
        pairs = np.stack([z + radii, z - radii])
        if not s.sigma_periodic:
            pairs = np.clip(pairs, a, b)
        samples = 0.5 * (g(pairs[0][:, None]) + g(pairs[1][:, None]))
        m, ok = _fit_exponent(radii, samples)
        exponents.append(m)
        conditioned = conditioned and ok
    exponent = float(max(exponents)) if exponents else float('nan')

    # zeros near one end of a periodic domain also cut the other end
    images = list(zeros)
    if s.sigma_periodic:
        images += [z + sg * length for z in zeros for sg in (-1.0, 1.0)]

    ladder = []
    for r in length * np.logspace(-1, -6, 6):
        bps = sorted({a, b} | {min(max(z + sg * r, a), b) for z in images
                                for sg in (-1.0, 1.0)})
        kept = [(lo, hi) for lo, hi in zip(bps[:-1], bps[1:])
                if not any(abs(0.5 * (lo + hi) - z) < r for z in images)]
        partial = sum(adaptive_gauss(integrand, [lo, hi], tol)[0]
                      for lo, hi in kept)
        ladder.append((float(r), float(partial)))

    if zeros and not conditioned:
        _logger.warning('contact order fit is ill-conditioned at %s', zeros)
        return AttainmentResult(math.inf, Verdict.INDETERMINATE, exponent,
                                math.nan, tuple((z,) for z in zeros),
                                tuple(ladder))
    if zeros and exponent >= 2.0 - 0.05:
        return AttainmentResult(math.inf, Verdict.DIVERGENT, exponent,
                                math.nan, tuple((z,) for z in zeros),
                                tuple(ladder))

    breakpoints = sorted({a, b} | {z for z in images if a < z < b})
    value, error, count = adaptive_gauss(integrand, breakpoints, tol,
                                         max_intervals=200000)
    _logger.debug('attainment quadrature used %d intervals', count)
    if value > PARTIAL_INTEGRAL_CAP and error > tol:
        return AttainmentResult(math.inf, Verdict.DIVERGENT, exponent, error,
                                tuple((z,) for z in zeros), tuple(ladder))
    return AttainmentResult(value, Verdict.FINITE, exponent, error,
                            tuple((z,) for z in zeros), tuple(ladder))


def _attainment_patch(g: Callable[[np.ndarray], np.ndarray], s: Scenario,
                      tol: float) -> AttainmentResult:
    # Only isolated zeros are classified for k >= 2.
    domain = s.sigma_domain()
    k = s.k
    grid = sigma_grid(s, 64)
    values = g(grid)
    if np.min(values) < -1e-8:
        raise WeightHypothesisError(
            f'q/p exceeds 1 on Σ_k: 1 - q/p = {float(np.min(values))!r}')
    if np.all(values <= 1e-6):
        return _touching_everywhere(s)

    zeros = []
    for index in np.flatnonzero(values <= 1e-6):
        found = optimize.minimize(
            lambda y: float(g(y[None, :])[0]), grid[index],
            method='Nelder-Mead',
            options={'xatol': 1e-10, 'fatol': 1e-14})
        y0 = found.x
        if found.fun <= 1e-12 and not any(
                np.linalg.norm(y0 - z) < 1e-3 for z in zeros):
            zeros.append(y0)

    radii = np.logspace(-2, -4, 7)
    exponents, conditioned = [], True
    directions = np.concatenate([np.eye(k), -np.eye(k)])
    for z in zeros:
        samples = np.array([np.mean(g(z[None, :] + r * directions))
                            for r in radii])
        m, ok = _fit_exponent(radii, samples)
        exponents.append(m)
        conditioned = conditioned and ok
    exponent = float(max(exponents)) if exponents else float('nan')
    zero_tuple = tuple(tuple(float(v) for v in z) for z in zeros)

    if zeros and not conditioned:
        return AttainmentResult(math.inf, Verdict.INDETERMINATE, exponent,
                                math.nan, zero_tuple, ())
    if zeros and exponent >= 2.0 * k - 0.05:
        return AttainmentResult(math.inf, Verdict.DIVERGENT, exponent,
                                math.nan, zero_tuple, ())

    def integrand(*y):
        point = np.array([y])
        value = g(point)[0]
        if value <= 0.0:
            return 0.0
        return float(s.sigma_density(point)[0] / math.sqrt(value))

    value, error = integrate.nquad(
        integrand, [list(bounds) for bounds in domain],
        opts={'epsabs': tol, 'epsrel': 1e-10, 'limit': 200})
    return AttainmentResult(float(value), Verdict.FINITE, exponent,
                            float(error), zero_tuple, ())


class NormalizedWeights(typing.NamedTuple):
    """Weights of the problem after the substitution ũ = √p u.

    ``triple`` is (1, q/p, η/p); ``extra_potential`` is
    V = −Δp/(2p) + |∇p|²/(4p²), entering the energy as −∫Vũ².
    """
    triple: WeightTriple
    q_over_p: ScalarField
    extra_potential: ScalarField

    @property
    def potential(self) -> ScalarField:
        """Zeroth-order term added to the stiffness, that is −V."""
        return self.extra_potential.scaled(-1.0)


def normalize_p(w: WeightTriple) -> NormalizedWeights:
    """Reduce the weights to p ≡ 1 through ũ = √p u."""
    p = w.p
    if p.depends_on_distances:
        raise WeightError(
            f'p = {p.expression!r} depends on distance variables; '
            f'normalisation needs p as a function of x1..x{p.dim}')
    if not p.is_smooth:
        raise WeightError(f'p = {p.expression!r} is not twice differentiable')

    p_expr = p.sympy_expr
    grad = [g.sympy_expr for g in p.gradient()]
    lap = p.laplacian().sympy_expr
    extra = sympy.simplify(-lap / (2 * p_expr)
                           + sum(gi ** 2 for gi in grad) / (4 * p_expr ** 2))

    q_over_p = ScalarField(sympy.simplify(w.q.sympy_expr / p_expr),
                           dim=w.dim)
    eta_over_p = ScalarField(sympy.simplify(w.eta.sympy_expr / p_expr),
                             dim=w.dim)
    triple = WeightTriple(ScalarField(1, dim=w.dim), q_over_p, eta_over_p)
    return NormalizedWeights(triple=triple, q_over_p=q_over_p,
                             extra_potential=ScalarField(extra, dim=w.dim))
