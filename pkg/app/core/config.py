from functools import lru_cache
from pydantic_settings import BaseSettings, SettingsConfigDict


class AppSettings(BaseSettings):
    NAME: str = "Galton-Watson Kolmogorov Toolkit"
    VERSION: str = "1.0.0"
    DESCRIPTION: str = "Kolmogorov constant, Q-process and invariant measures of non-critical Galton-Watson processes"
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        env_prefix="APP_",
    )


class FastAPISettings(BaseSettings):
    HOST: str = "127.0.0.1"
    PORT: int = 8000

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        env_prefix="FASTAPI_",
    )


class OffspringSettings(BaseSettings):
    MASS_TOLERANCE: float = 1e-12
    LF_TAIL_MASS: float = 1e-15
    FIXED_POINT_TOLERANCE: float = 1e-10

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        env_prefix="OFFSPRING_",
    )


class SeriesSettings(BaseSettings):
    ORDER: int = 512
    TRUNCATION_LOSS_LIMIT: float = 1e-6

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        env_prefix="SERIES_",
    )


class AsymptoticsSettings(BaseSettings):
    CRITICALITY_CUTOFF: float = 1e-9
    ROOT_TOLERANCE: float = 1e-14
    TOL: float = 1e-9
    N_MAX: int = 200
    BOUNDS_TOL: float = 1e-12
    BOUNDS_MAX_TERMS: int = 100_000
    EMPIRICAL_N_MAX: int = 400
    EMPIRICAL_TOL: float = 1e-13
    YAGLOM_J_MAX: int = 256

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        env_prefix="ASYMPTOTICS_",
    )


class QProcessSettings(BaseSettings):
    STATE_CAP: int = 10_000
    SAMPLING_TAIL: float = 1e-12
    J_MAX_CAP: int = 512
    PI_TAIL: float = 1e-12
    MEAN_RUNS: int = 100_000

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        env_prefix="QPROCESS_",
    )


class SimulationSettings(BaseSettings):
    REPLICATES: int = 100_000
    SEED: int = 20240601
    POPULATION_CAP: int = 10**9
    WORKERS: int = 1
    BLOCK_SIZE: int = 4096
    FLAGGED_FRACTION_LIMIT: float = 1e-3
    MIN_SURVIVORS: int = 200

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        env_prefix="SIMULATION_",
    )


class ReportSettings(BaseSettings):
    SIGNIFICANT_DIGITS: int = 17

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        env_prefix="REPORT_",
    )


class Settings(BaseSettings):
    app_settings: AppSettings = AppSettings()
    fastapi_settings: FastAPISettings = FastAPISettings()
    offspring_settings: OffspringSettings = OffspringSettings()
    series_settings: SeriesSettings = SeriesSettings()
    asymptotics_settings: AsymptoticsSettings = AsymptoticsSettings()
    qprocess_settings: QProcessSettings = QProcessSettings()
    simulation_settings: SimulationSettings = SimulationSettings()
    report_settings: ReportSettings = ReportSettings()

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
    )


@lru_cache()
def get_settings() -> Settings:
    return Settings()
