import math
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from api.v1.exceptions.offspring import LawViolation, NotFixedPointException, raise_for_violations
from api.v1.schemas.offspring import LawKind, LinearFractionalLawFile, MomentSet, OffspringLaw, PmfLawFile
from core.config import get_settings
from core.logging import get_logger

logger = get_logger(__name__)


def validate(raw_masses: Sequence[float], renormalize: bool = False) -> OffspringLaw:
    """
    Build a finite-pmf law from raw masses. Every violated constraint is
    reported at once; masses are rescaled to unit sum only on request.
    """
    if len(raw_masses) == 0:
        raise_for_violations([LawViolation(code="DegenerateLaw", message="mass list is empty")])
    probs = [float(mass) for mass in raw_masses]
    if renormalize:
        total = math.fsum(probs)
        if total > 0 and all(math.isfinite(mass) and mass >= 0 for mass in probs):
            logger.info(f"Renormalizing masses with total {total!r}")
            probs = [mass / total for mass in probs]
    law = OffspringLaw(kind=LawKind.finite_pmf, probs=tuple(probs))
    logger.debug(f"Validated finite law of degree {law.degree}")
    return law


def linear_fractional(b: float, c: float) -> OffspringLaw:
    """The law with p_0 = 1 - b/(1-c) and p_k = b c^(k-1), k >= 1."""
    return OffspringLaw(kind=LawKind.linear_fractional, lf_b=float(b), lf_c=float(c))


@lru_cache(maxsize=256)
def _lf_masses(b: float, c: float, order: int) -> np.ndarray:
    masses = np.empty(order + 1)
    masses[0] = 1.0 - b / (1.0 - c)
    masses[1:] = b * c ** np.arange(order)
    masses /= math.fsum(masses)
    masses.setflags(write=False)
    return masses


def masses(law: OffspringLaw) -> np.ndarray:
    """p_0..p_D; linear-fractional laws are cut at their truncation order and renormalized."""
    if law.kind == LawKind.finite_pmf:
        return np.asarray(law.probs, dtype=np.float64)
    return _lf_masses(law.lf_b, law.lf_c, law.truncation_order)


def truncate(law: OffspringLaw) -> OffspringLaw:
    """Finite-pmf version of a law (identity for finite laws)."""
    if law.kind == LawKind.finite_pmf:
        return law
    return OffspringLaw(kind=LawKind.finite_pmf, probs=tuple(masses(law).tolist()))


def gf_eval(law: OffspringLaw, s: float) -> tuple[float, float, float]:
    """(f(s), f'(s), f''(s)) on [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s = {s!r} is outside [0, 1]")
    return gf_eval_unchecked(law, s)


def gf_eval_unchecked(law: OffspringLaw, s: float) -> tuple[float, float, float]:
    """gf_eval without the domain check, for internal callers that stay inside [0, 1]."""
    if law.kind == LawKind.linear_fractional:
        b, c = law.lf_b, law.lf_c
        p0 = 1.0 - b / (1.0 - c)
        denominator = 1.0 - c * s
        return (
            p0 + b * s / denominator,
            b / denominator**2,
            2.0 * b * c / denominator**3,
        )
    coeffs = masses(law)
    first = P.polyder(coeffs)
    second = P.polyder(coeffs, 2) if coeffs.size > 2 else np.zeros(1)
    return (
        float(P.polyval(s, coeffs)),
        float(P.polyval(s, first)),
        float(P.polyval(s, second)),
    )


def moments(law: OffspringLaw) -> MomentSet:
    if law.kind == LawKind.linear_fractional:
        b, c = law.lf_b, law.lf_c
        m = b / (1.0 - c) ** 2
        second_factorial = 2.0 * b * c / (1.0 - c) ** 3
    else:
        _, m, second_factorial = gf_eval(law, 1.0)
    return MomentSet(m=m, second_factorial=second_factorial, b_one=second_factorial / 2.0)


def harris_sevastyanov(law: OffspringLaw, q: float) -> OffspringLaw:
    """
    Dual law with generating function f(qs)/q, i.e. masses p_k q^(k-1).
    A linear-fractional law maps to lf(b, c q).
    """
    if not 0.0 < q <= 1.0:
        raise NotFixedPointException(f"q = {q!r} is outside (0, 1]")
    tolerance = get_settings().offspring_settings.FIXED_POINT_TOLERANCE
    residual = abs(gf_eval(law, q)[0] - q)
    if residual > tolerance:
        logger.error(f"|f(q) - q| = {residual:.3e} exceeds {tolerance:g}")
        raise NotFixedPointException(f"|f(q) - q| = {residual:.3e} exceeds {tolerance:g}")
    if q == 1.0:
        return law
    logger.info(f"Building Harris-Sevastyanov dual at q = {q!r}")
    if law.kind == LawKind.linear_fractional:
        return linear_fractional(law.lf_b, law.lf_c * q)
    weights = q ** (np.arange(len(law.probs)) - 1.0)
    dual = np.asarray(law.probs) * weights
    # q carries up to the fixed-point tolerance, so the sum may drift by that much
    return validate(dual.tolist(), renormalize=True)


def taylor_at(law: OffspringLaw, point: float) -> np.ndarray:
    """Coefficients g_j = f^(j)(point)/j! of f(point + t) in powers of t (finite laws)."""
    coeffs = masses(law)
    degree = coeffs.size - 1
    shifted = np.zeros(degree + 1)
    for j in range(degree + 1):
        k = np.arange(j, degree + 1)
        binomials = np.array([math.comb(int(kk), j) for kk in k], dtype=np.float64)
        shifted[j] = math.fsum(coeffs[j:] * binomials * point ** (k - j))
    return shifted


def describe(law: OffspringLaw) -> dict:
    """Law echo in law-file form."""
    if law.kind == LawKind.linear_fractional:
        return {"type": "linear_fractional", "b": law.lf_b, "c": law.lf_c, "truncation_order": law.truncation_order}
    return {"type": "pmf", "p": list(law.probs)}


def from_law_file(body: PmfLawFile | LinearFractionalLawFile, renormalize: bool = False) -> OffspringLaw:
    if isinstance(body, PmfLawFile):
        return validate(body.p, renormalize=renormalize)
    return linear_fractional(body.b, body.c)
