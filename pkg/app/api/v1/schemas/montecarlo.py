from pydantic import BaseModel, ConfigDict, Field

from core.config import get_settings


class SimConfig(BaseModel):
    n: int = Field(ge=0)
    replicates: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2**64)
    population_cap: int = Field(default_factory=lambda: get_settings().simulation_settings.POPULATION_CAP, ge=1)

    model_config = ConfigDict(frozen=True)


class SimEstimate(BaseModel):
    """
    Monte Carlo estimates at horizon n. ``extinction_time_histogram[k]`` counts
    replicates with H = k (index 0 is always 0); ``censored`` counts replicates
    still alive at n.
    """

    n: int
    replicates: int
    seed: int
    survival_hat: float = Field(ge=0, le=1)
    survival_stderr: float
    conditional_mean_hat: float | None
    conditional_mean_stderr: float | None
    survivors: int
    flagged: int
    extinction_time_histogram: list[int]
    censored: int

    model_config = ConfigDict(frozen=True)


class KTracePoint(BaseModel):
    n: int
    ratio: float
    ratio_ci_low: float
    ratio_ci_high: float
    conditional_mean: float | None
    conditional_mean_stderr: float | None
    exact_ratio: float

    model_config = ConfigDict(frozen=True)
