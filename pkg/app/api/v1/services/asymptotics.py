import math
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from api.v1.exceptions.asymptotics import CriticalLawException, NotConvergedException
from api.v1.exceptions.base import InvalidInputException
from api.v1.schemas.asymptotics import (
    BoundsReport,
    Criticality,
    DeltaEstimate,
    LimitEstimate,
    NuCoefficients,
    NuSource,
    P11Check,
    ProcessParams,
    SandwichStep,
    YaglomConditional,
)
from api.v1.schemas.offspring import OffspringLaw
from api.v1.services import powerseries
from api.v1.services.iterate import fn_prime, gap_map, gap_remainder, iterate_f
from api.v1.services.offspring import gf_eval, gf_eval_unchecked, harris_sevastyanov, moments
from core.config import get_settings
from core.logging import get_logger

logger = get_logger(__name__)

_TINY_GAP = 1e-280


def _check_non_critical(m: float) -> None:
    cutoff = get_settings().asymptotics_settings.CRITICALITY_CUTOFF
    if abs(m - 1.0) <= cutoff:
        logger.error(f"Critical law rejected, m = {m!r}")
        raise CriticalLawException(f"Critical law: m = {m!r} is within {cutoff:g} of 1.")


def solve_q(law: OffspringLaw) -> float:
    """
    Extinction probability: 1 for m < 1, otherwise the root of f(s) - s in
    (0, 1), bracketed by Brent's method and polished with safeguarded Newton steps.
    """
    m = moments(law).m
    _check_non_critical(m)
    if m < 1.0:
        return 1.0

    # f' is increasing with f'(0) = p_1 < 1 < m = f'(1); f(s) - s is negative at the crossing
    turning = brentq(lambda s: gf_eval_unchecked(law, s)[1] - 1.0, 0.0, 1.0, xtol=1e-15)
    q = brentq(lambda s: gf_eval_unchecked(law, s)[0] - s, 0.0, turning, xtol=1e-16, rtol=4 * np.finfo(float).eps)

    residual = gf_eval_unchecked(law, q)[0] - q
    for _ in range(8):
        if residual == 0.0:
            break
        f, f1, _ = gf_eval_unchecked(law, q)
        candidate = q - residual / (f1 - 1.0)
        if not 0.0 < candidate < turning:
            break
        candidate_residual = gf_eval_unchecked(law, candidate)[0] - candidate
        if abs(candidate_residual) >= abs(residual):
            break
        q, residual = candidate, candidate_residual

    tolerance = get_settings().asymptotics_settings.ROOT_TOLERANCE
    if abs(residual) > tolerance:
        logger.warning(f"Fixed point residual {abs(residual):.3e} above {tolerance:g}")
    logger.debug(f"Extinction probability q = {q!r}, residual {residual:.3e}")
    return float(q)


def _gamma(b: float, mean: float) -> float:
    return b / (mean - mean**2)


def _a_value(q: float, gamma: float, s: float) -> float:
    return (q - s) / (1.0 + gamma * (q - s))


def derive_params(law: OffspringLaw) -> ProcessParams:
    q = solve_q(law)
    _, beta, second = gf_eval(law, q)
    b_q = second / 2.0
    gamma = _gamma(b_q, beta)
    gamma_q = q * second / (beta - beta**2)
    params = ProcessParams(
        m=moments(law).m,
        q=q,
        beta=beta,
        b_q=b_q,
        gamma=gamma,
        gamma_q=gamma_q,
        delta_theory=gamma_q / q,
        K_theory=_a_value(q, gamma, 0.0),
        criticality=Criticality.subcritical if q == 1.0 else Criticality.supercritical,
    )
    logger.info(f"Derived parameters: q={params.q!r}, beta={params.beta!r}, gamma={params.gamma!r}")
    return params


def closed_form_constant(law: OffspringLaw) -> float:
    """1/(1 + gamma) with gamma = b/(m - m^2), the subcritical specialization of the closed form."""
    moment_set = moments(law)
    if moment_set.m >= 1.0:
        raise ValueError("the subcritical closed form needs m < 1")
    return _a_value(1.0, _gamma(moment_set.b_one, moment_set.m), 0.0)


def a_gamma(params: ProcessParams, s: float) -> float:
    """A_gamma(s) = (q - s)/(1 + gamma (q - s))."""
    return _a_value(params.q, params.gamma, s)


def a_gamma_prime(params: ProcessParams, s: float) -> float:
    return -1.0 / (1.0 + params.gamma * (params.q - s)) ** 2


def aitken(sequence: Sequence[float]) -> list[float]:
    """
    One level of Aitken's delta-squared process; element k corresponds to
    the raw term k + 2. Terms whose second difference is at rounding level
    pass through unchanged.
    """
    x = np.asarray(sequence, dtype=np.float64)
    if x.size < 3:
        return x.tolist()
    first = x[2:] - x[1:-1]
    second = x[2:] - 2.0 * x[1:-1] + x[:-2]
    scale = np.maximum(np.abs(x[2:]), np.abs(x[1:-1]))
    flat = np.abs(second) <= 64.0 * np.finfo(float).eps * np.maximum(scale, np.finfo(float).tiny)
    safe = np.where(flat, 1.0, second)
    return np.where(flat, x[2:], x[2:] - first**2 / safe).tolist()


def _settled(extrapolants: Sequence[float], tol: float) -> bool:
    return len(extrapolants) >= 2 and abs(extrapolants[-1] - extrapolants[-2]) < tol


def _normalized_gaps(law: OffspringLaw, params: ProcessParams, s: float, n_max: int) -> list[float]:
    """R_n(s)/beta^n for n = 0..n_max, stopping once R_n is no longer representable."""
    step = gap_map(law, params.q)
    gap = params.q - s
    values = []
    for n in range(n_max + 1):
        if gap == 0.0 or abs(gap) < _TINY_GAP or not math.isfinite(gap):
            break
        values.append(gap / params.beta**n)
        gap = step(gap)
    return values


def extrapolate_gap_limit(law: OffspringLaw, params: ProcessParams, s: float, n_max: int, tol: float):
    """(A_hat(s), n_used, converged) for A_hat(s) = lim R_n(s)/beta^n."""
    values = _normalized_gaps(law, params, s, n_max)
    if not values:
        return 0.0, 0, True
    extrapolants = aitken(values)
    return extrapolants[-1], len(values) - 1, _settled(extrapolants, tol)


def default_s_points(q: float) -> list[float]:
    points = [0.0, 0.25 * q, 0.5 * q, 0.75 * q]
    if q < 1.0:
        points.append((1.0 + q) / 2.0)
    return points


def limit_estimate(
    law: OffspringLaw,
    params: ProcessParams,
    s_points: Iterable[float] | None = None,
    n_max: int | None = None,
    tol: float | None = None,
    with_traces: bool = False,
) -> LimitEstimate:
    """
    Empirical A_hat(s) = lim R_n(s)/beta^n with one Aitken level, delta_hat(s)
    = 2(1/A_hat(s) - 1/(q - s)) per probed point, K_hat = A_hat(0) and the
    raw trace beta^n / R_n(0).
    """
    settings = get_settings().asymptotics_settings
    n_max = settings.N_MAX if n_max is None else n_max
    tol = settings.TOL if tol is None else tol
    points = default_s_points(params.q) if s_points is None else sorted(set(float(s) for s in s_points))
    for s in points:
        if not 0.0 <= s < 1.0 or s == params.q:
            raise InvalidInputException(f"probe point s = {s!r} must lie in [0, 1) and differ from q")
    logger.info(f"Estimating limits at {len(points)} points with n_max={n_max}")

    estimates = []
    for s in points:
        a_hat, n_used, converged = extrapolate_gap_limit(law, params, s, n_max, tol)
        delta_hat = 2.0 * (1.0 / a_hat - 1.0 / (params.q - s))
        estimates.append(DeltaEstimate(s=s, a_hat=a_hat, delta_hat=delta_hat, n_used=n_used, converged=converged))
        if not converged:
            logger.warning(f"Limit at s={s!r} did not settle within {n_max} steps")

    zero = next((estimate for estimate in estimates if estimate.s == 0.0), None)
    if zero is None:
        a_zero, n_zero, converged_zero = extrapolate_gap_limit(law, params, 0.0, n_max, tol)
    else:
        a_zero, n_zero, converged_zero = zero.a_hat, zero.n_used, zero.converged

    trace = [1.0 / value for value in _normalized_gaps(law, params, 0.0, n_max)]
    traces = [iterate_f(law, s, n_max, params.q, params.beta) for s in points] if with_traces else []
    return LimitEstimate(
        K_hat=a_zero,
        delta_hat_at=estimates,
        n_used=max([n_zero] + [estimate.n_used for estimate in estimates]),
        converged=converged_zero and all(estimate.converged for estimate in estimates),
        slowly_varying_trace=trace,
        traces=traces,
    )


def _q_points(q: float, beta_k: float) -> tuple[float, float]:
    return q - q * beta_k, q + (1.0 - q) * beta_k


def delta_bounds(law: OffspringLaw, params: ProcessParams, tol: float | None = None) -> BoundsReport:
    """
    Delta_1 = sum f''(q_0(k))/f'(q_1(k)) beta^k and Delta_2 = sum f''(q_1(k))/f'(q_0(k)) beta^k
    with q_k(n) = q + (k - q) beta^n, summed until the geometric tail bound drops below tol.
    """
    settings = get_settings().asymptotics_settings
    tol = settings.BOUNDS_TOL if tol is None else tol
    q, beta = params.q, params.beta
    lower_cap = 2.0 * params.b_q / beta
    lower_terms: list[float] = []
    upper_terms: list[float] = []
    upper_infinite = False
    tail_bound = math.inf
    k = 0
    while k < settings.BOUNDS_MAX_TERMS:
        beta_k = beta**k
        q0, q1 = _q_points(q, beta_k)
        _, f1_q0, f2_q0 = gf_eval(law, q0)
        _, f1_q1, f2_q1 = gf_eval(law, q1)
        lower_terms.append(f2_q0 / f1_q1 * beta_k)
        if f1_q0 > 0.0:
            upper_terms.append(f2_q1 / f1_q0 * beta_k)
        else:
            upper_infinite = True
        geometric = beta_k * beta / (1.0 - beta)
        tail_bound = lower_cap * geometric
        if not upper_infinite:
            tail_bound = max(tail_bound, f2_q1 / f1_q0 * geometric)
        k += 1
        if tail_bound < tol:
            break
    else:
        logger.warning(f"Bounds tail {tail_bound:.3e} still above {tol:g} after {k} terms")

    if upper_infinite:
        logger.warning("p_1 = 0 makes the k = 0 term of Delta_2 divide by f'(0) = 0; Delta_2 is infinite")
    return BoundsReport(
        delta1=math.fsum(lower_terms),
        delta2=math.inf if upper_infinite else math.fsum(upper_terms),
        delta2_infinite=upper_infinite,
        terms_used=k,
        tail_bound=tail_bound,
    )


def sandwich_trace(law: OffspringLaw, params: ProcessParams, s: float, n: int) -> list[SandwichStep]:
    """
    Per-step check of f''(q_0(k))/(2 f'(q_1(k))) < beta/R_{k+1}(s) - 1/R_k(s) < f''(q_1(k))/(2 f'(q_0(k))).
    The middle term is formed from the second-order remainder of the gap step.
    """
    q, beta = params.q, params.beta
    step = gap_map(law, q)
    remainder = gap_remainder(law, q)
    gap = q - s
    steps = []
    for k in range(n):
        if gap == 0.0 or abs(gap) < _TINY_GAP:
            break
        following = step(gap)
        if following == 0.0:
            break
        q0, q1 = _q_points(q, beta**k)
        _, f1_q0, f2_q0 = gf_eval(law, q0)
        _, f1_q1, f2_q1 = gf_eval(law, q1)
        lower = f2_q0 / (2.0 * f1_q1)
        upper = f2_q1 / (2.0 * f1_q0) if f1_q0 > 0.0 else math.inf
        middle = gap * remainder(gap) / following
        slack = 1e-9 * max(abs(lower), abs(middle))
        holds = lower - slack <= middle <= upper + slack
        steps.append(SandwichStep(n=k, lower=lower, middle=middle, upper=upper, holds=holds))
        gap = following
    return steps


def a_gamma_schroder_residual(law: OffspringLaw, params: ProcessParams, s: float, n: int) -> float:
    """|A_gamma(f_n(qs)) - beta^n A_gamma(qs)| / beta^n, with f_n(qs) carried as its gap to q."""
    q, gamma = params.q, params.gamma
    step = gap_map(law, q)
    gap = q - q * s
    for _ in range(n):
        gap = step(gap)
    beta_n = params.beta**n
    return abs(gap / (1.0 + gamma * gap) - beta_n * a_gamma(params, q * s)) / beta_n


def closed_form_nu(params: ProcessParams, j_max: int) -> np.ndarray:
    """nu_j = gamma^(j-1)/(1 + q gamma)^(j+1), j = 1..j_max."""
    c = 1.0 + params.q * params.gamma
    j = np.arange(1, j_max + 1)
    return np.exp((j - 1) * math.log(params.gamma / c) - 2.0 * math.log(c))


def empirical_nu(
    law: OffspringLaw,
    params: ProcessParams,
    j_max: int,
    tol: float | None = None,
    n_max: int | None = None,
) -> tuple[np.ndarray, int]:
    """
    nu_j = lim P_1j(n)/beta^n, the coefficients of lim (f_n(s) - q)/beta^n
    for j >= 1, from series iteration with one Aitken level per coefficient.
    """
    settings = get_settings().asymptotics_settings
    tol = settings.EMPIRICAL_TOL if tol is None else tol
    n_max = settings.EMPIRICAL_N_MAX if n_max is None else n_max
    history: list[np.ndarray] = []
    previous = None
    for n, series in enumerate(powerseries.iterate_law(law, n_max, j_max)):
        if n == 0:
            continue
        history.append(series.coeffs[1:] / params.beta**n)
        history = history[-3:]
        if len(history) < 3:
            continue
        x0, x1, x2 = history
        second = x2 - 2.0 * x1 + x0
        flat = np.abs(second) <= 64.0 * np.finfo(float).eps * np.maximum(np.abs(x2), np.finfo(float).tiny)
        current = np.where(flat, x2, x2 - (x2 - x1) ** 2 / np.where(flat, 1.0, second))
        if previous is not None and np.max(np.abs(current - previous) / np.maximum(np.abs(current), 1.0)) < tol:
            logger.debug(f"Series limit settled after n={n}")
            return current, n
        previous = current
    logger.error(f"Series limit did not settle within n_max={n_max}")
    raise NotConvergedException(f"Empirical coefficients did not settle within n_max={n_max}.")


def nu_coefficients(
    params: ProcessParams,
    j_max: int,
    mode: NuSource = NuSource.closed_form,
    law: OffspringLaw | None = None,
    tol: float | None = None,
    n_max: int | None = None,
) -> NuCoefficients:
    if mode == NuSource.closed_form:
        return NuCoefficients(nu=closed_form_nu(params, j_max).tolist(), source=mode)
    if law is None:
        raise ValueError("empirical coefficients need the law")
    nu, n_used = empirical_nu(law, params, j_max, tol, n_max)
    return NuCoefficients(nu=nu.tolist(), source=mode, n_used=n_used)


def yaglom_conditional(
    law: OffspringLaw,
    params: ProcessParams,
    j_max: int | None = None,
    tol: float | None = None,
) -> YaglomConditional:
    """
    Limit law of Z(n) given n < H < infinity: the normalized empirical
    coefficients of the Harris-Sevastyanov dual, their mean mu and q/mu.
    """
    j_max = get_settings().asymptotics_settings.YAGLOM_J_MAX if j_max is None else j_max
    dual = harris_sevastyanov(law, params.q)
    dual_params = derive_params(dual)
    nu, n_used = empirical_nu(dual, dual_params, j_max, tol)
    total = math.fsum(nu)
    conditional = nu / total
    mu = math.fsum(np.arange(1, j_max + 1) * conditional)
    logger.info(f"Conditional limit mean mu = {mu!r}")
    return YaglomConditional(
        nu_cond=conditional.tolist(),
        mu=mu,
        implied_K=params.q / mu,
        total_mass=total,
        n_used=n_used,
    )


def p11_check(
    law: OffspringLaw,
    params: ProcessParams,
    n_max: int | None = None,
    tol: float | None = None,
) -> P11Check:
    """beta^(-n) P_11(n), P_11(n) = f_n'(0), against K^2/q^2."""
    settings = get_settings().asymptotics_settings
    n_max = settings.N_MAX if n_max is None else n_max
    tol = settings.TOL if tol is None else tol
    # K^2/q^2 = -A_gamma'(0)
    theory = -a_gamma_prime(params, 0.0)
    if n_max == 0:
        return P11Check(
            empirical_limit=None,
            theory=theory,
            discrepancy=None,
            a_hat_derivative=None,
            degenerate=False,
            note="P_11(0) = 1; no limit claimed at n_max = 0",
            trace=[1.0],
        )

    h = 1e-4 * params.q
    a_zero = extrapolate_gap_limit(law, params, 0.0, n_max, tol)[0]
    a_h = extrapolate_gap_limit(law, params, h, n_max, tol)[0]
    a_hat_derivative = -(a_h - a_zero) / h

    if law.p1 == 0.0:
        logger.warning("p_1 = 0: P_11(n) = 0 for every n >= 1")
        return P11Check(
            empirical_limit=0.0,
            theory=theory,
            discrepancy=-theory,
            a_hat_derivative=a_hat_derivative,
            degenerate=True,
            note="p_1 = 0 makes f'(0) = 0, so P_11(n) = 0 for all n >= 1",
            trace=[1.0] + [0.0] * n_max,
        )

    trace = [1.0]
    for n in range(1, n_max + 1):
        product = fn_prime(law, 0.0, n)
        normalized = product / params.beta**n
        if not math.isfinite(normalized) or product < _TINY_GAP:
            break
        trace.append(normalized)
    empirical = aitken(trace)[-1]
    return P11Check(
        empirical_limit=empirical,
        theory=theory,
        discrepancy=empirical - theory,
        a_hat_derivative=a_hat_derivative,
        degenerate=False,
        trace=trace,
    )
