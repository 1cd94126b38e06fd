from collections import deque
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P

from api.v1.exceptions.asymptotics import CriticalLawException
from api.v1.exceptions.iterate import TruncationLossExceededException
from api.v1.schemas.iterate import IterationRow, IterationTrace, LinearFractionalIterate, TransitionRow
from api.v1.schemas.offspring import LawKind, OffspringLaw
from api.v1.services import powerseries
from api.v1.services.offspring import gf_eval_unchecked, moments, taylor_at
from core.config import get_settings
from core.logging import get_logger

logger = get_logger(__name__)


def gap_map(law: OffspringLaw, q: float) -> Callable[[float], float]:
    """
    R -> q - f(q - R), evaluated without cancellation: through the Taylor
    coefficients of f at q for finite laws, in closed rational form for
    linear-fractional ones.
    """
    if law.kind == LawKind.linear_fractional:
        b, c = law.lf_b, law.lf_c
        base = 1.0 - c * q

        def step(gap: float) -> float:
            return b * gap / (base * (base + c * gap))

        return step

    tail = taylor_at(law, q)[1:]

    def step(gap: float) -> float:
        return gap * float(P.polyval(-gap, tail))

    return step


def gap_remainder(law: OffspringLaw, q: float) -> Callable[[float], float]:
    """R -> (beta R - (q - f(q - R))) / R^2, the second-order part of one gap step."""
    if law.kind == LawKind.linear_fractional:
        b, c = law.lf_b, law.lf_c
        base = 1.0 - c * q

        def remainder(gap: float) -> float:
            return b * c / (base**2 * (base + c * gap))

        return remainder

    curvature = taylor_at(law, q)[2:]

    def remainder(gap: float) -> float:
        return float(P.polyval(-gap, curvature))

    return remainder


def iterate_f(
    law: OffspringLaw,
    s: float,
    n: int,
    q: float | None = None,
    beta: float | None = None,
) -> IterationTrace:
    """
    f_0(s) = s, f_{k+1}(s) = f(f_k(s)) for k < n. With q (and beta) injected,
    each row also carries R_k(s) and beta^k / R_k(s).
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    step = gap_map(law, q) if q is not None else None
    value = float(s)
    gap = None if q is None else q - value
    rows = []
    for k in range(n + 1):
        normalized = None
        if gap is not None and beta is not None and gap != 0.0:
            normalized = beta**k / gap
        rows.append(IterationRow(n=k, f_n_at_s=value, R_n=gap, normalized=normalized))
        if k == n:
            break
        value = gf_eval_unchecked(law, value)[0]
        if step is not None:
            gap = step(gap)
    return IterationTrace(s=float(s), q=q, beta=beta, rows=rows)


def fn_derivatives(law: OffspringLaw, s: float, n: int) -> tuple[float, float, float]:
    """(f_n(s), f_n'(s), f_n''(s)) along the orbit of s by the chain rule."""
    value, first, second = float(s), 1.0, 0.0
    for _ in range(n):
        f, f1, f2 = gf_eval_unchecked(law, value)
        second = f2 * first**2 + f1 * second
        first = f1 * first
        value = f
    return value, first, second


def fn_prime(law: OffspringLaw, s: float, n: int) -> float:
    """f_n'(s) as the product of one-step derivatives along the orbit; f_0' = 1."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    value, product = float(s), 1.0
    for _ in range(n):
        f, f1, _ = gf_eval_unchecked(law, value)
        product *= f1
        value = f
    return product


@lru_cache(maxsize=64)
def iterated_series(law: OffspringLaw, n: int, order: int):
    """f_n as a truncated series of the given order."""
    return deque(powerseries.iterate_law(law, n, order), maxlen=1)[0]


def transition_row(
    law: OffspringLaw,
    i: int,
    n: int,
    j_max: int,
    check_loss: bool = True,
    loss_limit: float | None = None,
) -> TransitionRow:
    """
    P_i0(n)..P_ij_max(n), the coefficients of [f_n(s)]^i. The mass lost beyond
    j_max is checked against ``loss_limit`` (default TRUNCATION_LOSS_LIMIT)
    unless ``check_loss`` is off.
    """
    if i < 1 or n < 0:
        raise ValueError(f"transition_row needs i >= 1 and n >= 0, got i={i}, n={n}")
    if loss_limit is None:
        loss_limit = get_settings().series_settings.TRUNCATION_LOSS_LIMIT
    if n == 0:
        probs = [0.0] * (j_max + 1)
        loss = 0.0
        if i <= j_max:
            probs[i] = 1.0
        else:
            loss = 1.0
        row = TransitionRow(i=i, n=n, probs=probs, truncation_loss=loss)
    else:
        series = powerseries.power(iterated_series(law, n, j_max), i)
        row = TransitionRow(i=i, n=n, probs=series.coeffs.tolist(), truncation_loss=series.tail_loss)
    if check_loss and row.truncation_loss > loss_limit:
        logger.error(f"Row i={i}, n={n} loses {row.truncation_loss:.3e} beyond j_max={j_max}")
        raise TruncationLossExceededException(
            f"Row i={i}, n={n} loses {row.truncation_loss:.3e} beyond j_max={j_max} (limit {loss_limit:g})."
        )
    return row


def transition_matrix(law: OffspringLaw, n: int, size: int) -> np.ndarray:
    """
    Matrix of P_ij(n) for i = 0..size, j = 0..size (row 0 is the absorbing
    state), built from successive powers of the truncated f_n.
    """
    matrix = np.zeros((size + 1, size + 1))
    matrix[0, 0] = 1.0
    if n == 0:
        return np.eye(size + 1)
    base = iterated_series(law, n, size)
    current = base
    matrix[1] = base.coeffs
    for i in range(2, size + 1):
        current = powerseries.multiply(current, base)
        matrix[i] = current.coeffs
    return matrix


def lf_fixed_points(law: OffspringLaw) -> tuple[float, float]:
    """(q, s0): the extinction probability and the other fixed point of a linear-fractional f."""
    if law.kind != LawKind.linear_fractional:
        raise ValueError("closed-form iteration needs a linear_fractional law")
    m = moments(law).m
    cutoff = get_settings().asymptotics_settings.CRITICALITY_CUTOFF
    if abs(m - 1.0) <= cutoff:
        logger.error(f"Critical linear-fractional law, m = {m!r}")
        raise CriticalLawException(f"Critical law: m = {m!r} is within {cutoff:g} of 1.")
    other = law.p0 / law.lf_c
    return (1.0, other) if m < 1.0 else (other, 1.0)


def lf_closed_form(law: OffspringLaw, s: float, n: int) -> LinearFractionalIterate:
    """
    Exact f_n(s) and R_n(s) for a non-critical linear-fractional law. The
    Mobius matrix [[b - p0 c, p0], [-c, 1]] has eigenvectors (q, 1) and
    (s0, 1) and eigenvalue ratio beta, so in that basis n steps multiply
    (s - q)/(s - s0) by beta^n.
    """
    q, other = lf_fixed_points(law)
    b, c = law.lf_b, law.lf_c
    beta = b / (1.0 - c * q) ** 2
    if n == 0:
        return LinearFractionalIterate(n=0, s=s, f_n=s, R_n=q - s)
    if s == other:
        return LinearFractionalIterate(n=n, s=s, f_n=other, R_n=q - other)
    t = beta**n * (s - q) / (s - other)
    gap = t * (other - q) / (1.0 - t)
    return LinearFractionalIterate(n=n, s=s, f_n=q - gap, R_n=gap)
