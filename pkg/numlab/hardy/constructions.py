# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import logging
import math
import typing
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from . import _utils
from ._abc import DistanceFields, FermiChart, Scenario, sphere_area
from ._expressions import ScalarField
from .errors import (ChartError, ConstructionError, DomainError,
                     StencilError)
from .weights import (Verdict, WeightTriple, attainment_integral,
                      normalize_p, validate_weights)


_logger = logging.getLogger('numlab.hardy.constructions')

ArrayLike = Union[float, np.ndarray]

# ρ = β·e^{−τ} stays clear of underflow in δ⁻² up to this τ;
# scenarios with a positive rho_floor stop at ρ = rho_floor
TAU_MAX = 150.0


def log_power(a: float, t: ArrayLike) -> ArrayLike:
    """X_a(t) = (−log t)^a for 0 < t < 1."""
    values = np.asarray(t, dtype=float)
    if np.any(values <= 0.0) or np.any(values >= 1.0) \
            or np.any(~np.isfinite(values)):
        raise DomainError(f'log_power needs 0 < t < 1, got {t!r}')
    result = (-np.log(values)) ** a
    return float(result) if np.ndim(t) == 0 else result


class GroundStateSpec(typing.NamedTuple):
    """Parameters of W_{a,M,q} = X_a(δ̃)·e^{Md}·d·δ̃^α.

    ``epsilon`` shifts the reference weight to q_ref − ε. With ``limiting``
    set the exponent is frozen at (k−N)/2, which gives the virtual ground
    state d·δ̃^{(k−N)/2}.
    """
    a: float
    M: float
    q_ref: ScalarField
    scenario: Scenario
    epsilon: float = 0.0
    limiting: bool = False


class ExponentFields(typing.NamedTuple):
    alpha: np.ndarray
    alpha_tilde: np.ndarray


def _q_on_sigma(q_ref: ScalarField, s: Scenario,
                f: DistanceFields) -> np.ndarray:
    if q_ref.is_constant:
        return q_ref(f.sigma)
    sigma_fields = s.fields(f.sigma) if q_ref.depends_on_distances else None
    return q_ref(f.sigma, sigma_fields)


def exponent_fields(spec: GroundStateSpec, points: np.ndarray,
                    fields: Optional[DistanceFields] = None
                    ) -> ExponentFields:
    """α(x) and α̃(x) from the reference weight at σ(x̄)."""
    s = spec.scenario
    points = np.atleast_2d(points)
    f = s.fields(points) if fields is None else fields
    m = s.codim
    gap = 1.0 - (_q_on_sigma(spec.q_ref, s, f) - spec.epsilon) \
        + f.delta_tilde
    alpha_tilde = 0.25 * m ** 2 * gap
    if spec.limiting:
        alpha = np.full_like(gap, -0.5 * m)
    else:
        alpha = -0.5 * m + 0.5 * m * np.sqrt(np.maximum(gap, 0.0))
    return ExponentFields(alpha=alpha, alpha_tilde=alpha_tilde)


def w_values(spec: GroundStateSpec, points: np.ndarray) -> np.ndarray:
    """Vectorised W_{a,M,q} at (M, N) collar points."""
    s = spec.scenario
    points = np.atleast_2d(points)
    f = s.fields(points)
    dt = f.delta_tilde
    if np.any(dt <= 0.0) or np.any(dt >= 1.0):
        raise DomainError(
            f'W needs 0 < delta_tilde < 1, got range '
            f'[{float(np.min(dt))!r}, {float(np.max(dt))!r}]')
    alpha = exponent_fields(spec, points, f).alpha
    return ((-np.log(dt)) ** spec.a * np.exp(spec.M * f.d) * f.d
            * dt ** alpha)


def eval_w(spec: GroundStateSpec, x: Sequence[float]) -> ArrayLike:
    values = w_values(spec, np.atleast_2d(np.asarray(x, dtype=float)))
    return float(values[0]) if np.ndim(x) == 1 else values


class CollarConstants(typing.NamedTuple):
    h_max: float
    M0: float
    M1: float
    M2: float


def collar_constants(s: Scenario, w: Optional[WeightTriple] = None, *,
                     beta: Optional[float] = None,
                     samples: int = 4096) -> CollarConstants:
    """h_max = max|Δd| over the collar and the tilts M₀, M₁ and M₂."""
    points = s.sample_collar(samples, beta=beta, decades=2)
    h = np.abs(s.boundary_laplacian(points))
    h_max = float(np.max(h))
    drift = np.zeros_like(h)
    if w is not None and not w.p.is_constant:
        if w.p.depends_on_distances:
            raise ConstructionError(
                f'p = {w.p.expression!r} must be a function of x1..x{s.N} '
                f'to bound grad(p).grad(d)')
        grad_p = np.stack([g(points) for g in w.p.gradient()], axis=1)
        drift = np.abs(np.sum(grad_p * s.boundary_gradient(points), axis=1))
    return CollarConstants(h_max=h_max, M0=h_max + 1.0,
                           M1=-0.5 * h_max - 1.0,
                           M2=-0.5 * float(np.max(h + drift)) - 1.0)


def flat_ground_state_residual(N: int, k: int, x: Sequence[float]) -> float:
    """−Δu/u − ((N−k)²/4)|ỹ|⁻² for u = y¹|ỹ|^{(k−N)/2}.

    Computed analytically: Δ(y¹r^b) = y¹r^{b−2}·b(b+m) in ℝ^m, and
    b = −m/2 makes this vanish identically.
    """
    m = N - k
    y = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(y[:m]))
    if r == 0.0:
        raise DomainError('the flat ground state is singular at y_tilde = 0')
    b = -0.5 * m
    return -b * (b + m) / r ** 2 - 0.25 * m ** 2 / r ** 2


def flat_ground_state(N: int, k: int) -> _utils.Field:
    """u(y) = y¹|ỹ|^{(k−N)/2} as a vectorised field."""
    m = N - k

    def u(points):
        points = np.atleast_2d(points)
        r = np.linalg.norm(points[:, :m], axis=1)
        return points[:, 0] * r ** (-0.5 * m)
    return u


def laplacian_fd(f: _utils.Field, x: Sequence[float],
                 h: Optional[ArrayLike] = None, *,
                 inside: Optional[Callable[[np.ndarray], np.ndarray]] = None
                 ) -> Tuple[ArrayLike, ArrayLike]:
    """Richardson-extrapolated (2N+1)-point Laplacian with error estimate.

    ``inside`` is a membership mask; stencils leaving it are rejected.
    """
    points = np.atleast_2d(np.asarray(x, dtype=float))
    steps = np.broadcast_to(np.asarray(1e-3 if h is None else h,
                                       dtype=float), points.shape[:1])
    if np.any(steps <= 0.0):
        raise StencilError('finite-difference step must be positive')
    if not np.all(_utils.stencil_inside(inside, points, steps)):
        raise StencilError('finite-difference stencil leaves the domain')
    lap, err = _utils.central_laplacian(f, points, steps)
    if np.ndim(x) == 1:
        return float(lap[0]), float(err[0])
    return lap, err


class OperatorSpec(typing.NamedTuple):
    """L_λ = −Δ + V − ((N−k)²/4)·q·δ⁻² + λ·η·δ⁻².

    V is the optional zeroth-order ``potential`` of the p-normalisation;
    ``distance`` selects the singular distance ('delta' or 'delta_tilde').
    """
    lam: float
    q: ScalarField
    eta: ScalarField
    scenario: Scenario
    potential: Optional[ScalarField] = None
    distance: str = 'delta'

    @property
    def N(self) -> int:
        return self.scenario.N

    @property
    def k(self) -> int:
        return self.scenario.k

    @classmethod
    def from_weights(cls, lam: float, w: WeightTriple,
                     s: Scenario) -> 'OperatorSpec':
        """The operator of the p ≡ 1 reduction of ``w``."""
        normalized = normalize_p(w)
        potential = None if normalized.extra_potential.sympy_expr == 0 \
            else normalized.potential
        return cls(lam=lam, q=normalized.triple.q,
                   eta=normalized.triple.eta, scenario=s,
                   potential=potential)


class OperatorValue(typing.NamedTuple):
    value: np.ndarray
    error: np.ndarray
    f: np.ndarray
    zeroth_order: np.ndarray


def _apply(op: OperatorSpec, f: _utils.Field, points: np.ndarray,
           steps: np.ndarray) -> OperatorValue:
    s = op.scenario
    fields = s.fields(points)
    dist = getattr(fields, op.distance)
    lap, err = _utils.central_laplacian(f, points, steps)
    center = np.asarray(f(points), dtype=float)
    q = op.q(points, fields)
    eta = op.eta(points, fields)
    singular = (-0.25 * s.codim ** 2 * q + op.lam * eta) / dist ** 2
    if op.potential is not None:
        singular = singular + op.potential(points, fields)
    return OperatorValue(value=-lap + singular * center, error=err,
                         f=center, zeroth_order=singular)


def operator_apply(op: OperatorSpec, f: _utils.Field, x: Sequence[float],
                   h: Optional[ArrayLike] = None) -> Tuple[ArrayLike,
                                                          ArrayLike]:
    """L_λ f at x with the finite-difference error of −Δf."""
    s = op.scenario
    points = np.atleast_2d(np.asarray(x, dtype=float))
    if h is None:
        steps = _utils.fd_step(s.fields(points).delta_tilde)
    else:
        steps = np.broadcast_to(np.asarray(h, dtype=float),
                                points.shape[:1])
    if not np.all(_utils.stencil_inside(s.contains, points, steps)):
        raise StencilError('finite-difference stencil leaves the domain')
    result = _apply(op, f, points, steps)
    if np.ndim(x) == 1:
        return float(result.value[0]), float(result.error[0])
    return result.value, result.error


class SignReport:
    """Outcome of a pointwise sign sweep of L_λ applied to a construction.

    ``margin`` is the signed slack normalised by f·δ̃⁻², positive where
    the inequality holds; a sample is a violation when its margin is below
    minus the finite-difference error estimate.
    """

    def __init__(self, *, construction: str, lam: float, beta: float,
                 epsilon: Optional[float], samples: int,
                 delta_tilde: np.ndarray, margin: np.ndarray,
                 tolerance: np.ndarray, excluded: Dict[str, int],
                 positivity_violations: int = 0,
                 worst: Optional[Tuple[float, ...]] = None) -> None:
        self.__construction = construction
        self.__lam = lam
        self.__beta = beta
        self.__epsilon = epsilon
        self.__samples = samples
        self.__delta_tilde = delta_tilde
        self.__margin = margin
        self.__tolerance = tolerance
        self.__excluded = excluded
        self.__positivity = positivity_violations
        self.__worst = worst

    @property
    def construction(self) -> str:
        return self.__construction

    @property
    def lam(self) -> float:
        return self.__lam

    @property
    def beta(self) -> float:
        return self.__beta

    @property
    def epsilon(self) -> Optional[float]:
        return self.__epsilon

    @property
    def samples(self) -> int:
        return self.__samples

    @property
    def evaluated(self) -> int:
        return int(self.__margin.size)

    @property
    def excluded(self) -> Dict[str, int]:
        return dict(self.__excluded)

    @property
    def violations(self) -> int:
        return int(np.sum(self.__margin < -self.__tolerance))

    @property
    def positivity_violations(self) -> int:
        return self.__positivity

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.__positivity == 0

    @property
    def max_value(self) -> float:
        """Largest normalised value of the quantity that must be ≤ 0."""
        if self.__margin.size == 0:
            return float('nan')
        return float(np.max(-self.__margin))

    @property
    def worst(self) -> Optional[Tuple[float, ...]]:
        return self.__worst

    def margin_curve(self) -> List[Tuple[float, float]]:
        """Smallest margin per decade of δ̃, keyed by the decade's
        geometric centre."""
        if self.__margin.size == 0:
            return []
        decade = np.floor(np.log10(self.__delta_tilde))
        curve = []
        for value in np.unique(decade):
            mask = decade == value
            curve.append((float(10.0 ** (value + 0.5)),
                           float(np.min(self.__margin[mask]))))
        return curve

    def to_json(self) -> Dict[str, Any]:
        return {'construction': self.__construction,
                'lambda': self.__lam,
                'beta': self.__beta,
                'epsilon': self.__epsilon,
                'samples': self.__samples,
                'evaluated': self.evaluated,
                'excluded': dict(sorted(self.__excluded.items())),
                'violations': self.violations,
                'positivity_violations': self.__positivity,
                'max_value': self.max_value,
                'worst': None if self.__worst is None else list(self.__worst),
                'margin_curve': [list(p) for p in self.margin_curve()]}

    def __repr__(self):
        return (f'<SignReport {self.__construction} beta={self.__beta} '
                f'violations={self.violations}/{self.evaluated}>')


def _sweep_points(s: Scenario, beta: float, n: int,
                  seed: int) -> Tuple[np.ndarray, np.ndarray, Dict[str, int]]:
    points = s.sample_collar(n, beta=beta, seed=seed)
    f = s.fields(points)
    steps = _utils.fd_step(f.delta_tilde)
    reasons = s.excluded(points, steps)
    inside = _utils.stencil_inside(s.contains, points, 2.0 * steps)
    reasons[(~inside) & (reasons == '')] = 'stencil leaves domain'
    reasons[(f.delta_tilde >= beta) & (reasons == '')] = 'outside collar'
    keep = reasons == ''
    excluded: Dict[str, int] = {}
    for reason in reasons[~keep]:
        excluded[str(reason)] = excluded.get(str(reason), 0) + 1
    if excluded:
        _logger.warning('sign sweep excluded %d of %d samples: %s',
                        int(np.sum(~keep)), n, excluded)
    return points[keep], steps[keep], excluded


def _sign_report(name: str, op: OperatorSpec, field: _utils.Field,
                 points: np.ndarray, steps: np.ndarray, sign: float, *,
                 beta: float, epsilon: Optional[float], samples: int,
                 excluded: Dict[str, int],
                 positivity: Optional[np.ndarray] = None) -> SignReport:
    if points.shape[0] == 0:
        return SignReport(construction=name, lam=op.lam, beta=beta,
                          epsilon=epsilon, samples=samples,
                          delta_tilde=np.empty(0), margin=np.empty(0),
                          tolerance=np.empty(0), excluded=excluded)
    result = _apply(op, field, points, steps)
    dt = op.scenario.fields(points).delta_tilde
    scale = dt ** 2 / np.abs(result.f)
    margin = sign * result.value * scale
    rounding = 1e-9 * (np.abs(result.zeroth_order) * dt ** 2 + 1.0)
    tolerance = result.error * scale + rounding
    worst = None
    if margin.size:
        index = int(np.argmin(margin + tolerance))
        worst = tuple(float(v) for v in points[index])
    bad = 0 if positivity is None else int(np.sum(~positivity))
    report = SignReport(construction=name, lam=op.lam, beta=beta,
                        epsilon=epsilon, samples=samples, delta_tilde=dt,
                        margin=margin, tolerance=tolerance,
                        excluded=excluded, positivity_violations=bad,
                        worst=worst)
    _logger.info('%s sweep at beta=%g: %d violations of %d', name, beta,
                 report.violations, report.evaluated)
    return report


def subsolution_field(s: Scenario, q: ScalarField, epsilon: float,
                      M0: float) -> _utils.Field:
    """V_ε = W_{−1,M₀,q} + W_{0,M₀,q−ε}."""
    lower = GroundStateSpec(a=-1.0, M=M0, q_ref=q, scenario=s)
    shifted = GroundStateSpec(a=0.0, M=M0, q_ref=q, scenario=s,
                              epsilon=epsilon)

    def v(points):
        return w_values(lower, points) + w_values(shifted, points)
    return v


def supersolution_field(s: Scenario, q: ScalarField, M0: float,
                        M1: float) -> _utils.Field:
    """U = W_{0,M₁,q} − W_{−1,M₀,q}."""
    upper = GroundStateSpec(a=0.0, M=M1, q_ref=q, scenario=s)
    lower = GroundStateSpec(a=-1.0, M=M0, q_ref=q, scenario=s)

    def u(points):
        return w_values(upper, points) - w_values(lower, points)
    return u


def check_subsolution(s: Scenario, w: WeightTriple, lam: float,
                      epsilon: float, beta: Optional[float] = None,
                      n: int = 10000, *, seed: int = 0) -> SignReport:
    """Sweep the sign of L_λV_ε ≤ 0 over stratified collar samples."""
    if not 0.0 <= epsilon < 1.0:
        raise ConstructionError(f'epsilon must lie in [0, 1), got {epsilon}')
    beta = s.certified_beta if beta is None else beta
    op = OperatorSpec.from_weights(lam, w, s)
    constants = collar_constants(s, w, beta=beta)
    field = subsolution_field(s, op.q, epsilon, constants.M0)
    points, steps, excluded = _sweep_points(s, beta, n, seed)
    return _sign_report('subsolution', op, field, points, steps, -1.0,
                        beta=beta, epsilon=epsilon, samples=n,
                        excluded=excluded)


def supersolution_positivity(s: Scenario, points: np.ndarray, M0: float,
                             M1: float) -> np.ndarray:
    """The factor e^{M₁d} − e^{M₀d}X₋₁(δ̃) of U.

    It is positive exactly where U is.
    """
    f = s.fields(points)
    return (np.exp(M1 * f.d)
            - np.exp(M0 * f.d) / (-np.log(f.delta_tilde)))


def check_supersolution(s: Scenario, w: WeightTriple, lam: float,
                        beta: Optional[float] = None, n: int = 10000, *,
                        seed: int = 0) -> SignReport:
    """Sweep L_λU ≥ 0 and U > 0 over stratified collar samples."""
    beta = s.certified_beta if beta is None else beta
    op = OperatorSpec.from_weights(lam, w, s)
    constants = collar_constants(s, w, beta=beta)
    field = supersolution_field(s, op.q, constants.M0, constants.M1)
    points, steps, excluded = _sweep_points(s, beta, n, seed)
    positive = supersolution_positivity(s, points, constants.M0,
                                        constants.M1) > 0.0
    return _sign_report('supersolution', op, field, points, steps, 1.0,
                        beta=beta, epsilon=None, samples=n,
                        excluded=excluded, positivity=positive)


class LogSupersolutionReport(typing.NamedTuple):
    c: float
    M2: float
    violations: int
    evaluated: int
    excluded: Dict[str, int]

    def to_json(self) -> Dict[str, Any]:
        return {'c': self.c, 'M2': self.M2, 'violations': self.violations,
                'evaluated': self.evaluated,
                'excluded': dict(sorted(self.excluded.items()))}


def check_log_supersolution(s: Scenario, w: WeightTriple,
                            beta: Optional[float] = None, n: int = 4000, *,
                            seed: int = 0) -> LogSupersolutionReport:
    """Fit the constant c of the log-improved supersolution.

    With w̃ = W_{1/2,M₂,1} the fitted inequality is
    −div(p∇w̃)/w̃ − ((N−k)²/4)qδ⁻² ≥ c·δ⁻²X₋₂(δ). The divergence uses
    the original p: −div(p∇w̃) = −pΔw̃ − ∇p·∇w̃.
    """
    beta = s.certified_beta if beta is None else beta
    constants = collar_constants(s, w, beta=beta)
    spec = GroundStateSpec(a=0.5, M=constants.M2,
                           q_ref=ScalarField(1, dim=s.N), scenario=s)
    points, steps, excluded = _sweep_points(s, beta, n, seed)
    if points.shape[0] == 0:
        return LogSupersolutionReport(float('nan'), constants.M2, 0, 0,
                                      excluded)

    def field(p):
        return w_values(spec, p)

    f = s.fields(points)
    lap, _ = _utils.central_laplacian(field, points, steps)
    center = field(points)
    p, q, _ = w.evaluate(s, points, f)
    divergence = p * lap
    if not w.p.is_constant:
        grad_w, _ = _utils.central_gradient(field, points, steps)
        grad_p = np.stack([g(points) for g in w.p.gradient()], axis=1)
        divergence = divergence + np.sum(grad_p * grad_w, axis=1)
    quotient = -divergence / center - 0.25 * s.codim ** 2 * q / f.delta ** 2
    c = quotient * f.delta ** 2 * np.log(f.delta) ** 2
    return LogSupersolutionReport(c=float(np.min(c)), M2=constants.M2,
                                  violations=int(np.sum(c <= 0.0)),
                                  evaluated=int(c.size), excluded=excluded)


class CertificationResult(typing.NamedTuple):
    beta: Optional[float]
    history: Tuple[Tuple[float, int, int], ...]
    reports: Tuple[SignReport, ...]

    @property
    def certified(self) -> bool:
        return self.beta is not None


def certify_beta(s: Scenario, w: WeightTriple, lam: float, *,
                 epsilons: Sequence[float] = (0.5,), start: float = 0.1,
                 max_halvings: int = 8, n: int = 10000,
                 seed: int = 0) -> CertificationResult:
    """Halve β from ``start`` until the sub- and supersolution sweeps pass.

    ``history`` holds (β, subsolution violations, supersolution violations)
    per attempt; ``reports`` are the sweeps at the certified β.
    """
    history = []
    beta = min(start, s.beta0)
    for _ in range(max_halvings + 1):
        reports = [check_subsolution(s, w, lam, eps, beta, n, seed=seed)
                   for eps in epsilons]
        reports.append(check_supersolution(s, w, lam, beta, n, seed=seed))
        sub = sum(r.violations for r in reports[:-1])
        sup = reports[-1].violations + reports[-1].positivity_violations
        history.append((beta, sub, sup))
        if sub == 0 and sup == 0:
            _logger.info('certified beta=%g for %r', beta, s)
            return CertificationResult(beta, tuple(history), tuple(reports))
        beta = 0.5 * beta
    return CertificationResult(None, tuple(history), ())


# largest admissible growth of the fitted constant toward Σ_k
RUNG_GROWTH = 3.0


class EnvelopeReport(typing.NamedTuple):
    constants: Dict[float, float]
    ratio: float
    bound: float
    growth: float

    @property
    def stable(self) -> bool:
        return math.isfinite(self.bound) and self.growth <= RUNG_GROWTH

    def to_json(self) -> Dict[str, Any]:
        return {'constants': [[r, k] for r, k in
                              sorted(self.constants.items(), reverse=True)],
                'ratio': self.ratio,
                'bound': self.bound,
                'growth': self.growth,
                'stable': self.stable}


def delta_w_envelope(s: Scenario, spec: GroundStateSpec,
                     rungs: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
                     per_rung: int = 12) -> EnvelopeReport:
    """Fit K in |ΔW/W − leading| ≤ K·|log δ̃|·δ̃^{−3/2} per rung.

    The leading terms are
    −((N−k)²/4)qδ̃⁻² − 2a√α̃X₋₁δ̃⁻² + a(a−1)X₋₂δ̃⁻²
    + (h + 2M)/d.

    The remainder changes sign where |log δ̃| is close to 4, so single
    rung constants may be small; ``bound`` is their sup and ``growth``
    compares the sup over the finer half of the ladder with the sup over
    the coarser half. ``ratio`` is the max/min spread, for the record.
    """
    points, labels = s.ladder_samples(rungs, per_rung)
    f = s.fields(points)
    steps = _utils.fd_step(f.delta_tilde)
    keep = s.excluded(points, steps) == ''
    points, labels, steps = points[keep], labels[keep], steps[keep]
    f = s.fields(points)
    dt, d = f.delta_tilde, f.d

    def field(p):
        return w_values(spec, p)

    lap, _ = _utils.central_laplacian(field, points, steps)
    ratio = lap / field(points)
    q_sigma = _q_on_sigma(spec.q_ref, s, f) - spec.epsilon
    alpha_tilde = exponent_fields(spec, points, f).alpha_tilde
    log_dt = -np.log(dt)
    a = spec.a
    leading = (-0.25 * s.codim ** 2 * q_sigma / dt ** 2
               - 2.0 * a * np.sqrt(alpha_tilde) / (log_dt * dt ** 2)
               + a * (a - 1.0) / (log_dt ** 2 * dt ** 2)
               + (s.boundary_laplacian(points) + 2.0 * spec.M) / d)
    k_values = np.abs(ratio - leading) / (log_dt * dt ** -1.5)

    constants = {float(r): _utils.fit_constant(k_values[labels == r])
                 for r in rungs}
    values = np.array([v for v in constants.values() if np.isfinite(v)])
    spread = float(np.max(values) / np.min(values)) \
        if values.size and np.min(values) > 0.0 else float('inf')
    bound = float(np.max(values)) if values.size else float('nan')

    ordered = [constants[r] for r in sorted(constants, reverse=True)]
    half = max(1, len(ordered) // 2)
    coarse = _utils.fit_constant(np.array(ordered[:half]))
    fine = _utils.fit_constant(np.array(ordered[half:]))
    if not ordered[half:]:
        growth = 1.0
    elif coarse > 0.0 and math.isfinite(fine):
        growth = fine / coarse
    else:
        growth = float('inf')
    if growth > RUNG_GROWTH:
        _logger.warning('ΔW envelope constant grows by %g toward Σ_k',
                        growth)
    return EnvelopeReport(constants=constants, ratio=spread, bound=bound,
                          growth=growth)


class MassBound(typing.NamedTuple):
    left: float
    right: float
    ratio: float
    verdict: Verdict
    left_ladder: Tuple[Tuple[float, float], ...]
    right_ladder: Tuple[Tuple[float, float], ...]

    def to_json(self) -> Dict[str, Any]:
        finite = self.verdict is Verdict.FINITE
        return {'left': self.left if finite else None,
                'right': self.right if finite else None,
                'ratio': self.ratio if math.isfinite(self.ratio) else None,
                'verdict': self.verdict.value,
                'left_ladder': [list(p) for p in self.left_ladder],
                'right_ladder': [list(p) for p in self.right_ladder]}


def _collar_nodes(s: Scenario, order: int
                  ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo, hi = s.collar_angles()
    x, wts = np.polynomial.legendre.leggauss(order)
    theta = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
    w_theta = 0.5 * (hi - lo) * wts
    axes, weights = [], []
    for a, b in s.sigma_domain():
        if s.sigma_periodic:
            nodes = np.linspace(a, b, 2 * order, endpoint=False)
            axes.append(nodes)
            weights.append(np.full(nodes.size, (b - a) / nodes.size))
        else:
            axes.append(0.5 * (a + b) + 0.5 * (b - a) * x)
            weights.append(0.5 * (b - a) * wts)
    grids = np.meshgrid(theta, *axes, indexing='ij')
    wgrids = np.meshgrid(w_theta, *weights, indexing='ij')
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    node_weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1),
                           axis=1)
    return nodes[:, 0], nodes[:, 1:], node_weights


def _ladder_slope(ladder: Sequence[Tuple[float, float]]) -> float:
    """Growth of the last rung of a truncation ladder per unit of log."""
    if len(ladder) < 2:
        return math.nan
    (r1, v1), (r2, v2) = ladder[-2], ladder[-1]
    if not 0.0 < r2 < r1:
        return math.nan
    return (v2 - v1) / math.log(r1 / r2)


def subsolution_mass_lower_bound(s: Scenario, w: WeightTriple,
                                 beta: Optional[float] = None, *,
                                 order: int = 16,
                                 cutoffs: Sequence[float] = (1e-2, 1e-3,
                                                             1e-4, 1e-5,
                                                             1e-6)
                                 ) -> MassBound:
    """Compare ∫_{U_β} V₀²/δ² with ∫_{Σ_k} dσ/√(1 − q/p).

    The collar integral runs in collar coordinates with the radial
    variable ρ = β·e^{−τ}. When the boundary integral diverges both sides
    are reported as ladders truncated at ρ ≥ cutoff·β.
    """
    beta = s.beta if beta is None else beta
    op = OperatorSpec.from_weights(0.0, w, s)
    constants = collar_constants(s, w, beta=beta)
    v0 = subsolution_field(s, op.q, 0.0, constants.M0)
    theta, params, weights = _collar_nodes(s, order)

    def radial(tau):
        rho = np.full(theta.size, beta * math.exp(-tau))
        x, density = s.collar_map(rho, theta, params)
        delta = s.fields(x).delta
        with np.errstate(divide='ignore', invalid='ignore'):
            terms = weights * v0(x) ** 2 / delta ** 2 * density
        return np.sum(np.where(np.isfinite(terms), terms, 0.0)) * rho[0]

    tau_max = TAU_MAX
    if s.rho_floor > 0.0:
        tau_max = min(tau_max, math.log(beta / s.rho_floor))

    ik = attainment_integral(normalize_p(w).triple, s)
    left_ladder = []
    for cutoff in cutoffs:
        value, _ = integrate.quad_vec(radial, 0.0, -math.log(cutoff),
                                      epsrel=1e-8)
        left_ladder.append((float(cutoff * beta), float(value)))

    if ik.verdict is Verdict.FINITE:
        left, _ = integrate.quad_vec(radial, 0.0, tau_max, epsrel=1e-8)
        left = float(left)
        return MassBound(left=left, right=ik.value, ratio=left / ik.value,
                         verdict=ik.verdict, left_ladder=tuple(left_ladder),
                         right_ladder=ik.ladder)
    # both sides diverge: compare their growth per unit of log(1/cutoff)
    right_slope = _ladder_slope(ik.ladder)
    ratio = (_ladder_slope(left_ladder) / right_slope if right_slope > 0.0
             else math.nan)
    return MassBound(left=math.inf, right=math.inf, ratio=ratio,
                     verdict=ik.verdict, left_ladder=tuple(left_ladder),
                     right_ladder=ik.ladder)


class ConcentrationResult(typing.NamedTuple):
    value: float
    tau_prime: float
    flat_ratio: float
    ladder: Tuple[Tuple[float, float], ...]

    def to_json(self) -> Dict[str, Any]:
        return {'value': self.value, 'tau_prime': self.tau_prime,
                'flat_ratio': self.flat_ratio,
                'ladder': [list(p) for p in self.ladder]}


def _bump(r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # χ(r) = exp(1 − 1/(1 − r²)) on [0, 1) and its derivative
    inside = r < 1.0
    safe = np.where(inside, r, 0.0)
    denom = 1.0 - safe ** 2
    chi = np.where(inside, np.exp(1.0 - 1.0 / denom), 0.0)
    dchi = np.where(inside, -2.0 * safe / denom ** 2 * chi, 0.0)
    return chi, dchi


# chart geometry is frozen below this radius; powers of ρ are exact
_RHO_EVAL_FLOOR = 1e-6


class _ConcentrationNodes(typing.NamedTuple):
    y: np.ndarray
    rho: np.ndarray
    weights: np.ndarray


def _test_function(y: np.ndarray, m: int, tau_p: float
                   ) -> Tuple[np.ndarray, np.ndarray]:
    """u = y¹ρ^bχ(|y|), b = −m/2 + τ', returned as u/ρ^{b+1} and ∇u/ρ^b."""
    b = -0.5 * m + tau_p
    rho = np.linalg.norm(y[:, :m], axis=1)
    r = np.linalg.norm(y, axis=1)
    chi, dchi = _bump(r)
    e = y[:, :m] / rho[:, None]
    cos = e[:, 0]
    grad = (y[:, 0] * dchi / np.where(r > 0, r, 1.0))[:, None] * y
    grad[:, :m] += (b * cos * chi)[:, None] * e
    grad[:, 0] += chi
    return cos * chi, grad


def _concentration_nodes(m: int, k: int, tau_p: float, order: int
                         ) -> _ConcentrationNodes:
    """Quadrature nodes of the unit ball with y¹ > 0.

    Radially ρ = e^{−s}: Gauss-Legendre on s ∈ [0, 10] and Gauss-Laguerre
    on the tail, where χ is constant to rounding. The weights carry the
    factor ρ^{2b+m} = e^{−2τ's} of the scaled integrands, so no power of
    ρ is ever formed.
    """
    gl_x, gl_w = np.polynomial.legendre.leggauss(2 * order)
    s_head = 5.0 * (gl_x + 1.0)
    w_head = 5.0 * gl_w * np.exp(-2.0 * tau_p * s_head)
    lag_x, lag_w = np.polynomial.laguerre.laggauss(order)
    rate = 2.0 * tau_p
    s_tail = 10.0 + lag_x / rate
    w_tail = lag_w / rate * np.exp(lag_x - rate * s_tail)
    s_all = np.concatenate([s_head, s_tail])
    rho = np.maximum(np.exp(-s_all), _RHO_EVAL_FLOOR)
    w_rho = np.concatenate([w_head, w_tail])

    if m == 2:
        lo, hi = -0.5 * math.pi, 0.5 * math.pi
    else:
        lo, hi = 0.0, 0.5 * math.pi
    t_x, t_w = np.polynomial.legendre.leggauss(order)
    theta = 0.5 * (lo + hi) + 0.5 * (hi - lo) * t_x
    w_theta = 0.5 * (hi - lo) * t_w
    if m > 2:
        w_theta = w_theta * sphere_area(m - 2) * np.sin(theta) ** (m - 2)

    tangential = [t_x] * k
    w_tangential = [t_w] * k
    grids = np.meshgrid(rho, theta, *tangential, indexing='ij')
    wgrids = np.meshgrid(w_rho, w_theta, *w_tangential, indexing='ij')
    rho_g, theta_g = grids[0].ravel(), grids[1].ravel()
    weights = np.prod(np.stack([g.ravel() for g in wgrids]), axis=0)

    y = np.zeros((rho_g.size, m + k))
    y[:, 0] = rho_g * np.cos(theta_g)
    y[:, 1] = rho_g * np.sin(theta_g)
    for j in range(k):
        y[:, m + j] = grids[2 + j].ravel()
    keep = np.linalg.norm(y, axis=1) < 1.0
    return _ConcentrationNodes(y[keep], rho_g[keep], weights[keep])


def _chart_jacobian(chart: FermiChart, y: np.ndarray) -> np.ndarray:
    # (M, N, N) with column j = ∂F/∂y_j
    n = y.shape[1]
    scale = np.maximum(np.linalg.norm(y, axis=1), 1e-2)
    h = (1e-5 * scale)[:, None]
    columns = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        plus = chart.map(y + h * e)
        minus = chart.map(y - h * e)
        columns.append((plus - minus) / (2.0 * h))
    return np.stack(columns, axis=2)


def _chart_quotient(s: Scenario, w: Optional[WeightTriple], lam: float,
                    chart: Optional[FermiChart], epsilon: float,
                    tau_p: float, order: int) -> float:
    # both integrals are divided by ρ^{2b}; see _concentration_nodes
    m, k = s.codim, s.k
    nodes = _concentration_nodes(m, k, tau_p, order)
    u, grad_u = _test_function(nodes.y, m, tau_p)
    weights = nodes.weights
    if chart is None:
        numerator = np.sum(weights * np.sum(grad_u ** 2, axis=1))
        return float(numerator / np.sum(weights * u ** 2))

    y = epsilon * nodes.y
    grad_y = grad_u / epsilon
    jac = _chart_jacobian(chart, y)
    metric = np.einsum('mij,mik->mjk', jac, jac)
    volume = np.sqrt(np.abs(np.linalg.det(metric)))
    inv_grad = np.linalg.solve(metric, grad_y[:, :, None])[:, :, 0]
    grad_sq = np.sum(grad_y * inv_grad, axis=1)

    x = chart.map(y)
    f = s.fields(x)
    p, q, eta = w.evaluate(s, x, f)
    singular = u ** 2 * (nodes.rho / f.delta) ** 2
    dy = weights * epsilon ** s.N * volume
    numerator = np.sum(dy * (p * grad_sq - lam * eta * singular))
    value = float(numerator / np.sum(dy * q * singular))
    if not math.isfinite(value):
        raise ConstructionError(
            f'non-finite concentration quotient at epsilon={epsilon}')
    return value


def concentration_upper_bound(s: Scenario, w: WeightTriple, lam: float,
                              tau: float,
                              eps_ladder: Sequence[float] = (0.05, 0.02,
                                                             0.01, 0.005),
                              *, order: int = 24) -> ConcentrationResult:
    """Upper bound on μ_λ from concentrating test functions.

    u_τ = y¹ρ^{−m/2+τ'}χ(|y|) is scaled by ε and pushed through the
    Fermi chart at a point of Σ_k where q = p; τ' is halved from τ until the
    flat quotient is at most (N−k)²/4 + τ. Returns the smallest quotient
    over the ε ladder.
    """
    if tau <= 0.0:
        raise ConstructionError(f'tau must be positive, got {tau}')
    report = validate_weights(w, s, 1024)
    candidates = report.argmax_sigma
    if abs(report.max_q_over_p - 1.0) > 1e-8:
        raise ConstructionError(
            f'q/p peaks at {report.max_q_over_p!r} on Σ_k, not at 1')
    sigma0 = s.sigma_points(candidates[len(candidates) // 2])[0]
    chart = s.chart(sigma0)

    tau_p = tau
    flat = _chart_quotient(s, None, 0.0, None, 1.0, tau_p, order)
    for _ in range(30):
        if flat <= s.plateau + tau:
            break
        tau_p *= 0.5
        flat = _chart_quotient(s, None, 0.0, None, 1.0, tau_p, order)
    else:
        raise ConstructionError(
            f'flat quotient {flat!r} stays above the plateau + tau')

    ladder = []
    for eps in eps_ladder:
        while eps >= chart.radius:
            eps *= 0.5
            _logger.warning('shrinking epsilon to %g to stay in the chart',
                            eps)
        try:
            value = _chart_quotient(s, w, lam, chart, eps, tau_p, order)
        except ChartError:
            continue
        ladder.append((float(eps), value))
    if not ladder:
        raise ConstructionError('no epsilon of the ladder fits in the chart')
    best = min(value for _, value in ladder)
    return ConcentrationResult(value=best, tau_prime=tau_p, flat_ratio=flat,
                               ladder=tuple(ladder))
