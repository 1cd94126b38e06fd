import logging
import logging.config
import sys

from core.config import get_settings

SERVICES_LOGGER = "api.v1.services"

LOGGING_CONFIG = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "uvicorn": {
            "()": "uvicorn.logging.DefaultFormatter",
            "fmt": "%(asctime)s - %(name)s - %(levelprefix)s %(message)s",
            "use_colors": True,
        },
        "custom": {
            "()": "core.logging.CustomFormatter",
        },
    },
    # all records go to stderr, stdout carries CLI reports
    "handlers": {
        "uvicorn": {
            "formatter": "uvicorn",
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
        },
        "stderr": {
            "formatter": "custom",
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
        },
    },
    "loggers": {
        "uvicorn": {"handlers": ["uvicorn"], "level": "INFO", "propagate": False},
        "uvicorn.error": {"handlers": ["uvicorn"], "level": "INFO", "propagate": False},
        "uvicorn.access": {"handlers": ["uvicorn"], "level": "WARNING", "propagate": False},
        SERVICES_LOGGER: {"level": get_settings().app_settings.LOG_LEVEL, "propagate": True},
        "multiprocessing": {"level": "WARNING"},
    },
    "root": {
        "handlers": ["stderr"],
        "level": get_settings().app_settings.LOG_LEVEL,
    },
}


class CustomFormatter(logging.Formatter):
    """Level-coloured records; colours only when stderr is a terminal, call sites only at DEBUG."""

    COLORS = {
        logging.DEBUG: "\x1b[38;20m",
        logging.INFO: "\x1b[38;20m",
        logging.WARNING: "\x1b[33;20m",
        logging.ERROR: "\x1b[31;20m",
        logging.CRITICAL: "\x1b[31;1m",
    }
    RESET = "\x1b[0m"
    BRIEF = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    TRACED = BRIEF + "       (%(pathname)s:%(lineno)d)"

    def __init__(self, use_colors: bool | None = None):
        super().__init__()
        self.use_colors = sys.stderr.isatty() if use_colors is None else use_colors

    def format(self, record: logging.LogRecord) -> str:
        fmt = self.TRACED if record.levelno == logging.DEBUG else self.BRIEF
        if self.use_colors:
            fmt = self.COLORS.get(record.levelno, "") + fmt + self.RESET
        return logging.Formatter(fmt).format(record)


_configured = False


def get_logger(name: str) -> logging.Logger:
    global _configured
    if not _configured:
        logging.config.dictConfig(LOGGING_CONFIG)
        _configured = True
    return logging.getLogger(name)


def set_log_level(level: str) -> None:
    """Override the configured level for the root and the numerical services."""
    level = level.upper()
    logging.getLogger().setLevel(level)
    logging.getLogger(SERVICES_LOGGER).setLevel(level)
