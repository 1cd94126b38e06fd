from pydantic import BaseModel, ConfigDict, Field

from api.v1.schemas.asymptotics import NuSource


class QRow(BaseModel):
    """Q_i1(n)..Q_ij_max(n) (index 0 of ``probs`` is j = 1)."""

    i: int = Field(ge=1)
    n: int = Field(ge=0)
    probs: list[float]
    truncation_loss: float

    model_config = ConfigDict(frozen=True)


class QProcessMoments(BaseModel):
    alpha: float
    mean_W: float

    model_config = ConfigDict(frozen=True)


class InvariantMeasure(BaseModel):
    """nu_j and pi_j = j q^(j-1) nu_j for j = 1..j_max with the invariance defect of pi."""

    nu: list[float]
    pi: list[float]
    source: NuSource
    residual_l1: float
    total_mass: float
    mean: float

    model_config = ConfigDict(frozen=True)


class SchroderResidual(BaseModel):
    s: float
    closed_form: float
    empirical: float | None = None

    model_config = ConfigDict(frozen=True)


class QProcessTrajectory(BaseModel):
    seed: int
    states: list[int]

    model_config = ConfigDict(frozen=True)


class QProcessMeanEstimate(BaseModel):
    steps: int
    runs: int
    seed: int
    mean: float
    stderr: float
    exact_mean: float

    model_config = ConfigDict(frozen=True)
