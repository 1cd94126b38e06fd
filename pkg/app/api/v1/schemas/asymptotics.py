from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from api.v1.schemas.iterate import IterationTrace


class Criticality(str, Enum):
    subcritical = "subcritical"
    supercritical = "supercritical"


class ProcessParams(BaseModel):
    """
    Structural parameters of a non-critical process: mean m, extinction
    probability q, beta = f'(q), b_q = f''(q)/2, gamma = b_q/(beta - beta^2),
    gamma_q = q f''(q)/(beta - beta^2), delta_theory = gamma_q/q and the
    closed-form constant K_theory = q/(1 + q gamma).
    """

    m: float
    q: float = Field(gt=0, le=1)
    beta: float = Field(gt=0, lt=1)
    b_q: float
    gamma: float = Field(gt=0)
    gamma_q: float
    delta_theory: float
    K_theory: float
    criticality: Criticality

    model_config = ConfigDict(frozen=True)


class DeltaEstimate(BaseModel):
    """Empirical limit A_hat(s) = lim R_n(s)/beta^n and delta_hat(s) = 2(1/A_hat(s) - 1/(q-s))."""

    s: float
    a_hat: float
    delta_hat: float
    n_used: int
    converged: bool

    model_config = ConfigDict(frozen=True)


class LimitEstimate(BaseModel):
    K_hat: float
    delta_hat_at: list[DeltaEstimate]
    n_used: int
    converged: bool
    slowly_varying_trace: list[float]
    traces: list[IterationTrace] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class BoundsReport(BaseModel):
    """Series bounds Delta_1 <= delta <= Delta_2; Delta_2 is infinite when p_1 = 0."""

    delta1: float
    delta2: float
    delta2_infinite: bool
    terms_used: int
    tail_bound: float

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class NuSource(str, Enum):
    closed_form = "closed_form"
    empirical = "empirical"


class NuCoefficients(BaseModel):
    """nu_j for j = 1..j_max (index 0 of ``nu`` is j = 1)."""

    nu: list[float]
    source: NuSource
    n_used: int | None = None
    converged: bool = True

    model_config = ConfigDict(frozen=True)


class YaglomConditional(BaseModel):
    """Normalized dual coefficients nu_k^cond, their mean mu and the implied constant q/mu."""

    nu_cond: list[float]
    mu: float
    implied_K: float
    total_mass: float
    n_used: int

    model_config = ConfigDict(frozen=True)


class P11Check(BaseModel):
    empirical_limit: float | None
    theory: float
    discrepancy: float | None
    a_hat_derivative: float | None
    degenerate: bool
    note: str | None = None
    trace: list[float] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)


class SandwichStep(BaseModel):
    n: int
    lower: float
    middle: float
    upper: float
    holds: bool

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")
