import math
from enum import Enum
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, StrictFloat, model_validator

from api.v1.exceptions.offspring import LawViolation, raise_for_violations
from core.config import get_settings


class LawKind(str, Enum):
    finite_pmf = "finite_pmf"
    linear_fractional = "linear_fractional"


def law_violations(probs: tuple[float, ...], tolerance: float) -> list[LawViolation]:
    """Every violated offspring-law constraint of a finite mass list."""
    violations: list[LawViolation] = []
    if not probs:
        return [LawViolation(code="DegenerateLaw", message="mass list is empty")]
    for index, mass in enumerate(probs):
        if not math.isfinite(mass):
            violations.append(LawViolation(code="NegativeMass", message=f"p_{index} is not finite", index=index))
        elif mass < 0:
            violations.append(LawViolation(code="NegativeMass", message=f"p_{index} = {mass!r} is negative", index=index))
    total = math.fsum(probs)
    if abs(total - 1.0) > tolerance:
        violations.append(
            LawViolation(code="MassSumMismatch", message=f"masses sum to {total!r}, not 1 within {tolerance:g}")
        )
    p0 = probs[0]
    p1 = probs[1] if len(probs) > 1 else 0.0
    if p0 <= 0:
        violations.append(LawViolation(code="DegenerateLaw", message="p_0 must be positive", index=0))
    if p0 + p1 >= 1:
        violations.append(LawViolation(code="DegenerateLaw", message="p_0 + p_1 must be below 1"))
    for index, mass in enumerate(probs):
        if mass == 1.0:
            violations.append(LawViolation(code="DegenerateLaw", message=f"p_{index} equals 1", index=index))
    return violations


class OffspringLaw(BaseModel):
    """
    An offspring distribution {p_k}: either a finite mass list p_0..p_D or the
    linear-fractional family p_0 = 1 - b/(1-c), p_k = b*c^(k-1).
    Linear-fractional laws record the order at which their tail mass drops
    below the truncation threshold.
    """

    kind: LawKind
    probs: tuple[float, ...] | None = None
    lf_b: float | None = None
    lf_c: float | None = None
    truncation_order: int | None = None

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_invariants(self):
        tolerance = get_settings().offspring_settings.MASS_TOLERANCE
        if self.kind == LawKind.finite_pmf:
            if self.probs is None:
                raise_for_violations([LawViolation(code="DegenerateLaw", message="finite_pmf law needs masses")])
            raise_for_violations(law_violations(self.probs, tolerance))
            return self

        b, c = self.lf_b, self.lf_c
        violations: list[LawViolation] = []
        if b is None or c is None or not (math.isfinite(b) and math.isfinite(c)):
            violations.append(LawViolation(code="DegenerateLaw", message="linear_fractional law needs finite b and c"))
        else:
            if not 0 < b < 1:
                violations.append(LawViolation(code="DegenerateLaw", message=f"b = {b!r} must lie in (0, 1)"))
            if not 0 < c < 1:
                violations.append(LawViolation(code="DegenerateLaw", message=f"c = {c!r} must lie in (0, 1)"))
            if not violations and b / (1 - c) >= 1:
                violations.append(LawViolation(code="DegenerateLaw", message="b/(1-c) must be below 1 so that p_0 > 0"))
        raise_for_violations(violations)
        if self.truncation_order is None:
            tail = get_settings().offspring_settings.LF_TAIL_MASS
            object.__setattr__(self, "truncation_order", lf_truncation_order(b, c, tail))
        return self

    @property
    def p0(self) -> float:
        if self.kind == LawKind.finite_pmf:
            return self.probs[0]
        return 1.0 - self.lf_b / (1.0 - self.lf_c)

    @property
    def p1(self) -> float:
        if self.kind == LawKind.finite_pmf:
            return self.probs[1] if len(self.probs) > 1 else 0.0
        return self.lf_b

    @property
    def degree(self) -> int:
        """D for finite laws, the truncation order for linear-fractional ones."""
        if self.kind == LawKind.finite_pmf:
            return len(self.probs) - 1
        return self.truncation_order


def lf_truncation_order(b: float, c: float, tail_mass: float) -> int:
    """Smallest D with sum_{k>D} b c^(k-1) = b c^D / (1-c) <= tail_mass."""
    order = 1
    while b * c**order / (1.0 - c) > tail_mass:
        order += 1
    return order


class MomentSet(BaseModel):
    m: float = Field(gt=0)
    second_factorial: float = Field(ge=0)
    b_one: float = Field(ge=0)

    model_config = ConfigDict(frozen=True)


class PmfLawFile(BaseModel):
    """Law file body {"type": "pmf", "p": [...]}."""

    type: Literal["pmf"]
    p: list[StrictFloat] = Field(min_length=1)

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class LinearFractionalLawFile(BaseModel):
    """Law file body {"type": "linear_fractional", "b": ..., "c": ...}."""

    type: Literal["linear_fractional"]
    b: StrictFloat
    c: StrictFloat

    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


LawFile = Annotated[Union[PmfLawFile, LinearFractionalLawFile], Field(discriminator="type")]
