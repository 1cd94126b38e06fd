"""
Truncated power-series arithmetic over binary64 coefficients.

Binary operations truncate to the shorter order. Convolutions accumulate
with Kahan compensation, vectorized across output coefficients.
"""

import math

import numpy as np

from api.v1.exceptions.powerseries import InnerConstantOutOfRangeException, ZeroOrderSeriesException
from api.v1.schemas.offspring import OffspringLaw
from api.v1.schemas.powerseries import TruncatedSeries
from api.v1.services.offspring import masses
from core.config import get_settings
from core.logging import get_logger

logger = get_logger(__name__)


def identity(order: int) -> TruncatedSeries:
    coeffs = np.zeros(order + 1)
    if order >= 1:
        coeffs[1] = 1.0
    return TruncatedSeries(coeffs=coeffs)


def constant(value: float, order: int) -> TruncatedSeries:
    coeffs = np.zeros(order + 1)
    coeffs[0] = value
    return TruncatedSeries(coeffs=coeffs)


def from_law(law: OffspringLaw, order: int | None = None) -> TruncatedSeries:
    """Generating function of a law as a series of the given order (default SERIES_ORDER)."""
    order = get_settings().series_settings.ORDER if order is None else order
    p = masses(law)
    coeffs = np.zeros(order + 1)
    kept = min(order, p.size - 1) + 1
    coeffs[:kept] = p[:kept]
    return TruncatedSeries(coeffs=coeffs, tail_loss=math.fsum(p[kept:]))


def evaluate(a: TruncatedSeries, s: float) -> float:
    total = 0.0
    for coefficient in a.coeffs[::-1]:
        total = total * s + coefficient
    return float(total)


def coefficient(a: TruncatedSeries, j: int) -> float:
    return float(a.coeffs[j]) if j <= a.order else 0.0


def _kahan_convolve(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    """First order+1 coefficients of a*b with compensated summation."""
    total = np.zeros(order + 1)
    compensation = np.zeros(order + 1)
    for i in np.flatnonzero(a[: order + 1]):
        width = min(order + 1 - i, b.size)
        if width <= 0:
            continue
        window = slice(i, i + width)
        y = a[i] * b[:width] - compensation[window]
        t = total[window] + y
        compensation[window] = (t - total[window]) - y
        total[window] = t
    return total


def _true_mass(a: TruncatedSeries) -> float:
    return math.fsum(a.coeffs) + a.tail_loss


def multiply(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    order = min(a.order, b.order)
    coeffs = _kahan_convolve(a.coeffs, b.coeffs, order)
    loss = _true_mass(a) * _true_mass(b) - math.fsum(coeffs)
    return TruncatedSeries(coeffs=coeffs, tail_loss=max(loss, 0.0))


def compose(outer: TruncatedSeries, inner: TruncatedSeries) -> TruncatedSeries:
    """
    outer(inner(s)) by Horner's scheme over series, truncated to the shorter
    order. The inner series must be a generating function with inner(0) in [0, 1).
    """
    c0 = float(inner.coeffs[0])
    if not 0.0 <= c0 < 1.0:
        logger.error(f"Composition with inner constant term {c0!r}")
        raise InnerConstantOutOfRangeException(f"Inner constant term {c0!r} is outside [0, 1).")
    order = min(outer.order, inner.order)
    inner_coeffs = inner.coeffs[: order + 1]
    acc = np.zeros(order + 1)
    for coefficient_k in outer.coeffs[::-1]:
        acc = _kahan_convolve(acc, inner_coeffs, order)
        acc[0] += coefficient_k
    inner_mass = _true_mass(inner)
    loss = evaluate(outer, inner_mass) + outer.tail_loss - math.fsum(acc)
    return TruncatedSeries(coeffs=acc, tail_loss=max(loss, 0.0))


def power(a: TruncatedSeries, i: int) -> TruncatedSeries:
    """a(s)^i by repeated squaring."""
    if i < 1:
        raise ValueError(f"power needs i >= 1, got {i}")
    if i == 1:
        return a
    result: TruncatedSeries | None = None
    base = a
    while i:
        if i & 1:
            result = base if result is None else multiply(result, base)
        i >>= 1
        if i:
            base = multiply(base, base)
    return result


def differentiate(a: TruncatedSeries) -> TruncatedSeries:
    if a.order < 1:
        raise ZeroOrderSeriesException()
    return TruncatedSeries(coeffs=a.coeffs[1:] * np.arange(1, a.order + 1))


def iterate_law(law: OffspringLaw, n: int, order: int):
    """Yield f_0, f_1, ..., f_n as series of the given order (f_0 = s)."""
    # the outer series keeps every mass: f_k(0) > 0 feeds high powers into low orders
    f = from_law(law, max(order, law.degree))
    current = identity(order)
    yield current
    for _ in range(n):
        current = compose(f, current)
        yield current
