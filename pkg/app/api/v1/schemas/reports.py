from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from api.v1.schemas.asymptotics import (
    BoundsReport,
    DeltaEstimate,
    LimitEstimate,
    ProcessParams,
    SandwichStep,
    YaglomConditional,
)
from api.v1.schemas.montecarlo import KTracePoint, SimEstimate
from api.v1.schemas.qprocess import (
    InvariantMeasure,
    QProcessMeanEstimate,
    QProcessMoments,
    QProcessTrajectory,
    QRow,
    SchroderResidual,
)


class Discrepancy(BaseModel):
    """Closed-form K versus the iteration limit, reported and never failed on."""

    K_theory: float
    K_hat: float
    absolute_gap: float
    relative_gap: float
    lf_exact: bool

    model_config = ConfigDict(frozen=True)


class InvariantSummary(BaseModel):
    source: str
    j_max: int
    total_mass: float
    mean: float
    residual_l1: float
    head: list[float]

    model_config = ConfigDict(frozen=True)


class Report(BaseModel):
    law_echo: dict[str, Any]
    params: ProcessParams
    limit: LimitEstimate
    bounds: BoundsReport
    invariant: list[InvariantSummary]
    discrepancy: Discrepancy

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class LedgerEntry(BaseModel):
    """One identity of the verification suite."""

    name: str
    residual: float | None
    threshold: float | None
    passed: bool | None
    conditional: bool = False
    informational: bool = False
    skipped_reason: str | None = None

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class VerifyLedger(BaseModel):
    law_echo: dict[str, Any]
    entries: list[LedgerEntry] = Field(default_factory=list)
    passed: bool

    model_config = ConfigDict(frozen=True)


class BoundsSummary(BaseModel):
    bounds: BoundsReport
    delta_hat_at: list[DeltaEstimate]
    sandwich: list[SandwichStep]

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class InvariantReport(BaseModel):
    params: ProcessParams
    measure: InvariantMeasure
    schroder: list[SchroderResidual]
    conditional_limit: YaglomConditional | None = None

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class QProcessReport(BaseModel):
    params: ProcessParams
    start: int
    steps: int
    moments: QProcessMoments
    row: QRow
    trajectory: QProcessTrajectory
    mean_estimate: QProcessMeanEstimate

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="strings")


class SimulationReport(BaseModel):
    """
    Unconditioned and extinction-conditioned runs next to their exact survival
    probabilities. ``k_trace`` is left empty when the dual process leaves too
    few survivors at the requested horizons.
    """

    params: ProcessParams
    unconditioned: SimEstimate
    exact_survival: float
    conditioned: SimEstimate
    exact_conditioned_survival: float
    k_trace: list[KTracePoint] | None = None

    model_config = ConfigDict(frozen=True)
