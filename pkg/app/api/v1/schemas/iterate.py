from pydantic import BaseModel, ConfigDict, Field


class IterationRow(BaseModel):
    n: int = Field(ge=0)
    f_n_at_s: float
    R_n: float | None = None
    normalized: float | None = None

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class IterationTrace(BaseModel):
    """
    Orbit s, f(s), f_2(s), ... of the generating function with the gaps
    R_n(s) = q - f_n(s) and the normalized values beta^n / R_n(s).
    """

    s: float
    q: float | None = None
    beta: float | None = None
    rows: list[IterationRow] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class TransitionRow(BaseModel):
    """P_i0(n)..P_ij_max(n) with the mass lost beyond j_max."""

    i: int = Field(ge=1)
    n: int = Field(ge=0)
    probs: list[float]
    truncation_loss: float

    model_config = ConfigDict(frozen=True)


class LinearFractionalIterate(BaseModel):
    n: int = Field(ge=0)
    s: float
    f_n: float
    R_n: float

    model_config = ConfigDict(frozen=True)
