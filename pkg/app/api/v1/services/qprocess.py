"""
The Q-process: the chain conditioned on eventual, but not yet completed,
extinction. Transition rows are built through the Harris-Sevastyanov dual,
whose n-step transitions are q^(j-i) P_ij(n), so Q_ij(n) = j P^dual_ij(n)/(i beta^n)
never multiplies by large powers of 1/q.
"""

import math
from functools import lru_cache
from typing import Iterable

import numpy as np
from numpy.polynomial import polynomial as P

from api.v1.exceptions.iterate import TruncationLossExceededException
from api.v1.exceptions.qprocess import StateCapExceededException
from api.v1.schemas.asymptotics import NuSource, ProcessParams
from api.v1.schemas.offspring import LawKind, OffspringLaw
from api.v1.schemas.qprocess import (
    InvariantMeasure,
    QProcessMeanEstimate,
    QProcessMoments,
    QProcessTrajectory,
    QRow,
    SchroderResidual,
)
from api.v1.services.asymptotics import nu_coefficients
from api.v1.services.iterate import fn_derivatives, transition_matrix, transition_row
from api.v1.services.offspring import gf_eval, harris_sevastyanov
from core.config import get_settings
from core.logging import get_logger

logger = get_logger(__name__)


@lru_cache(maxsize=64)
def _dual(law: OffspringLaw, q: float) -> OffspringLaw:
    return harris_sevastyanov(law, q)


def support_degree(law: OffspringLaw) -> int:
    """Largest offspring count carried by the law (the truncation order for linear-fractional laws)."""
    return law.truncation_order if law.kind == LawKind.linear_fractional else law.degree


def q_row(law: OffspringLaw, params: ProcessParams, i: int, n: int, j_max: int) -> QRow:
    """Q_i1(n)..Q_ij_max(n) with Q_ij(n) = j q^(j-i) P_ij(n)/(i beta^n)."""
    if i < 1 or n < 0:
        raise ValueError(f"q_row needs i >= 1 and n >= 0, got i={i}, n={n}")
    loss_limit = get_settings().series_settings.TRUNCATION_LOSS_LIMIT
    dual = _dual(law, params.q)
    dual_row = transition_row(dual, i, n, j_max, check_loss=False)
    j = np.arange(1, j_max + 1)
    probs = j * np.asarray(dual_row.probs[1:]) / (i * params.beta**n)
    loss = max(1.0 - math.fsum(probs), 0.0)
    if loss > loss_limit:
        logger.error(f"Q-row i={i}, n={n} loses {loss:.3e} beyond j_max={j_max}")
        raise TruncationLossExceededException(
            f"Q-row i={i}, n={n} loses {loss:.3e} beyond j_max={j_max} (limit {loss_limit:g})."
        )
    return QRow(i=i, n=n, probs=probs.tolist(), truncation_loss=loss)


def q_matrix(law: OffspringLaw, params: ProcessParams, n: int, size: int) -> np.ndarray:
    """Q_ij(n) for i, j = 1..size; entry [i-1, j-1]."""
    dual = _dual(law, params.q)
    p = transition_matrix(dual, n, size)[1:, 1:]
    index = np.arange(1, size + 1)
    return p * index[np.newaxis, :] / (index[:, np.newaxis] * params.beta**n)


def w_eval(law: OffspringLaw, params: ProcessParams, s: float, n: int, i: int = 1) -> float:
    """w_n^(i)(s) = [f_n(qs)/q]^(i-1) s f_n'(qs)/beta^n, the generating function of row i of Q(n)."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s = {s!r} is outside [0, 1]")
    value, first, _ = fn_derivatives(law, params.q * s, n)
    return (value / params.q) ** (i - 1) * s * first / params.beta**n


def dual_eval(law: OffspringLaw, params: ProcessParams, s: float) -> float:
    """f_q(s) = f(qs)/q."""
    return gf_eval(law, params.q * s)[0] / params.q


def functional_equation_residual(law: OffspringLaw, params: ProcessParams, s: float, n: int, i: int = 1) -> float:
    """|w_{n+1}^(i)(s) - (w(s)/f_q(s)) w_n^(i)(f_q(s))|."""
    inner = dual_eval(law, params, s)
    right = w_eval(law, params, s, 1) / inner * w_eval(law, params, inner, n, i)
    return abs(w_eval(law, params, s, n + 1, i) - right)


def qp_moments(params: ProcessParams, n: int, i: int = 1) -> QProcessMoments:
    """alpha = 1 + (1 - beta) gamma_q and E_i W(n) = (i - 1) beta^n + 1 + gamma_q (1 - beta^n)."""
    beta_n = params.beta**n
    return QProcessMoments(
        alpha=1.0 + (1.0 - params.beta) * params.gamma_q,
        mean_W=(i - 1) * beta_n + 1.0 + params.gamma_q * (1.0 - beta_n),
    )


def qp_mean_direct(law: OffspringLaw, params: ProcessParams, n: int, i: int = 1) -> float:
    """E_i W(n) as the derivative of w_n^(i) at s = 1, from the chain rule for f_n''(q)."""
    _, _, second = fn_derivatives(law, params.q, n)
    beta_n = params.beta**n
    return (i - 1) * beta_n + 1.0 + params.q * second / beta_n


def pi_tail(params: ProcessParams, j_max: int) -> float:
    """Closed-form mass beyond j_max: rho^J (1 + J (1 - rho)) with rho = q gamma/(1 + q gamma)."""
    rho = params.q * params.gamma / (1.0 + params.q * params.gamma)
    return rho**j_max * (1.0 + j_max * (1.0 - rho))


def default_j_max(params: ProcessParams) -> int:
    settings = get_settings().qprocess_settings
    for j_max in range(1, settings.J_MAX_CAP + 1):
        if pi_tail(params, j_max) < settings.PI_TAIL:
            return j_max
    logger.warning(f"Invariant measure tail still {pi_tail(params, settings.J_MAX_CAP):.3e} at the cap")
    return settings.J_MAX_CAP


def closed_form_pi(params: ProcessParams, j_max: int) -> tuple[np.ndarray, np.ndarray]:
    """(nu, pi) with pi_j = j (q gamma)^(j-1)/(1 + q gamma)^(j+1), nu_j = gamma^(j-1)/(1 + q gamma)^(j+1)."""
    c = 1.0 + params.q * params.gamma
    j = np.arange(1, j_max + 1)
    log_c = math.log(c)
    nu = np.exp((j - 1) * math.log(params.gamma / c) - 2.0 * log_c)
    pi = j * np.exp((j - 1) * math.log(params.q * params.gamma / c) - 2.0 * log_c)
    return nu, pi


def invariance_residual(law: OffspringLaw, params: ProcessParams, pi: Iterable[float]) -> float:
    """||pi Q(1) - pi||_1 on the truncated state space."""
    pi = np.asarray(list(pi), dtype=np.float64)
    q1 = q_matrix(law, params, 1, pi.size)
    return float(np.sum(np.abs(pi @ q1 - pi)))


def pi_measure(
    law: OffspringLaw,
    params: ProcessParams,
    j_max: int | None = None,
    mode: NuSource = NuSource.closed_form,
    tol: float | None = None,
    n_max: int | None = None,
) -> InvariantMeasure:
    """
    Invariant measure pi_j = lim Q_ij(n) = j q^(j-1) nu_j. The closed form comes
    from -s A_gamma'(qs) = s/(1 + gamma q (1 - s))^2; the empirical source
    extrapolates P_1j(n)/beta^n.
    """
    j_max = default_j_max(params) if j_max is None else j_max
    logger.info(f"Building {mode.value} invariant measure with j_max={j_max}")
    if mode == NuSource.closed_form:
        nu, pi = closed_form_pi(params, j_max)
    else:
        # dual coefficients are q^(j-1) nu_j and decay even when nu_j grows
        j = np.arange(1, j_max + 1)
        dual = nu_coefficients(params, j_max, NuSource.empirical, _dual(law, params.q), tol, n_max)
        dual_nu = np.asarray(dual.nu)
        pi = j * dual_nu
        nu = dual_nu / params.q ** (j - 1)
    return InvariantMeasure(
        nu=nu.tolist(),
        pi=pi.tolist(),
        source=mode,
        residual_l1=invariance_residual(law, params, pi),
        total_mass=math.fsum(pi),
        mean=math.fsum(np.arange(1, j_max + 1) * pi),
    )


def closed_form_pi_eval(params: ProcessParams, s: float) -> float:
    return s / (1.0 + params.gamma * params.q * (1.0 - s)) ** 2


def schroder_residual(
    law: OffspringLaw,
    params: ProcessParams,
    s_points: Iterable[float],
    empirical: InvariantMeasure | None = None,
) -> list[SchroderResidual]:
    """
    pi(s) - (w(s)/f_q(s)) pi(f_q(s)) per probed s for the closed-form pi and,
    when given, the empirical one (evaluated as its truncated series).
    """
    coefficients = None
    if empirical is not None:
        coefficients = np.concatenate([[0.0], np.asarray(empirical.pi)])
    residuals = []
    for s in s_points:
        inner = dual_eval(law, params, s)
        factor = w_eval(law, params, s, 1) / inner
        closed = closed_form_pi_eval(params, s) - factor * closed_form_pi_eval(params, inner)
        measured = None
        if coefficients is not None:
            measured = abs(float(P.polyval(s, coefficients) - factor * P.polyval(inner, coefficients)))
        residuals.append(SchroderResidual(s=s, closed_form=abs(closed), empirical=measured))
    return residuals


def chapman_kolmogorov_residual(law: OffspringLaw, params: ProcessParams, n: int, m: int, size: int, rows: int) -> float:
    """max |Q(n+m) - Q(n) Q(m)| over the first ``rows`` source states and all j <= size."""
    product = q_matrix(law, params, n, size) @ q_matrix(law, params, m, size)
    direct = q_matrix(law, params, n + m, size)
    return float(np.max(np.abs(direct[:rows] - product[:rows])))


def ratio_gap(law: OffspringLaw, params: ProcessParams, i: int, j: int, n: int) -> float:
    """|Q_ij(n)/Q_1j(n) - 1|."""
    matrix = q_matrix(law, params, n, max(i, j))
    return abs(matrix[i - 1, j - 1] / matrix[0, j - 1] - 1.0)


class _RowSampler:
    """One-step rows of the Q-process, built on demand and cached per state."""

    def __init__(self, law: OffspringLaw, params: ProcessParams, state_cap: int):
        self.law = law
        self.params = params
        self.state_cap = state_cap
        self.degree = support_degree(_dual(law, params.q))
        self.tail = get_settings().qprocess_settings.SAMPLING_TAIL
        self._rows: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def row(self, state: int) -> tuple[np.ndarray, np.ndarray]:
        if state in self._rows:
            return self._rows[state]
        if state > self.state_cap:
            logger.error(f"Q-process reached state {state} above the cap {self.state_cap}")
            raise StateCapExceededException(f"Q-process reached state {state} above the cap {self.state_cap}.")
        j_max = state * self.degree
        probs = np.asarray(q_row(self.law, self.params, state, 1, j_max).probs)
        probs = np.clip(probs, 0.0, None)
        tail = np.cumsum(probs[::-1])[::-1]
        kept = int(np.searchsorted(-tail, -self.tail, side="right"))
        kept = max(kept, 1)
        folded = probs[:kept].copy()
        folded[-1] += math.fsum(probs[kept:])
        cdf = np.cumsum(folded)
        cdf /= cdf[-1]
        states = np.arange(1, kept + 1)
        self._rows[state] = (states, cdf)
        return states, cdf

    def step(self, current: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        following = np.empty_like(current)
        for state in np.unique(current):
            states, cdf = self.row(int(state))
            mask = current == state
            picks = np.minimum(np.searchsorted(cdf, uniforms[mask], side="right"), states.size - 1)
            following[mask] = states[picks]
        return following


def _run_chain(
    law: OffspringLaw,
    params: ProcessParams,
    steps: int,
    runs: int,
    seed: int,
    start: int,
    state_cap: int | None,
) -> np.ndarray:
    if start < 1:
        raise ValueError(f"the Q-process starts from a state >= 1, got {start}")
    state_cap = get_settings().qprocess_settings.STATE_CAP if state_cap is None else state_cap
    sampler = _RowSampler(law, params, state_cap)
    generator = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    states = np.empty((steps + 1, runs), dtype=np.int64)
    states[0] = start
    for k in range(steps):
        states[k + 1] = sampler.step(states[k], generator.random(runs))
    return states


def sample_qprocess(
    law: OffspringLaw,
    params: ProcessParams,
    steps: int,
    seed: int,
    state_cap: int | None = None,
    start: int = 1,
) -> QProcessTrajectory:
    """W(0..steps) from exact one-step rows; identical for a fixed seed."""
    logger.info(f"Sampling a Q-process trajectory of {steps} steps with seed {seed}")
    states = _run_chain(law, params, steps, 1, seed, start, state_cap)
    return QProcessTrajectory(seed=seed, states=states[:, 0].tolist())


def estimate_qprocess_mean(
    law: OffspringLaw,
    params: ProcessParams,
    steps: int,
    runs: int,
    seed: int,
    start: int = 1,
    state_cap: int | None = None,
) -> QProcessMeanEstimate:
    """Mean of W(steps) over independent trajectories against the exact E_i W(n)."""
    logger.info(f"Estimating E W({steps}) from {runs} trajectories")
    final = _run_chain(law, params, steps, runs, seed, start, state_cap)[-1].astype(np.float64)
    stderr = float(final.std(ddof=1) / math.sqrt(runs)) if runs > 1 else math.inf
    return QProcessMeanEstimate(
        steps=steps,
        runs=runs,
        seed=seed,
        mean=float(final.mean()),
        stderr=stderr,
        exact_mean=qp_moments(params, steps, start).mean_W,
    )
