from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict
import uvicorn

from core.config import get_settings
from core.logging import LOGGING_CONFIG, get_logger
from api.v1 import analysis_router

logger = get_logger(__name__)


app = FastAPI(
    title=get_settings().app_settings.NAME,
    description=get_settings().app_settings.DESCRIPTION,
    version=get_settings().app_settings.VERSION,
    docs_url="/api/openapi",
    openapi_url="/api/openapi.json",
)

app.include_router(analysis_router, prefix="/v1/analysis", tags=["analysis"])


class StatusResponse(BaseModel):
    status: str
    model_config = ConfigDict(json_schema_extra={"examples": [{"status": "App healthy"}]})


@app.get("/", response_model=StatusResponse)
async def health_check():
    return StatusResponse(status="App healthy")


@app.exception_handler(Exception)
async def base_exception_handler(request: Request, exc: Exception):
    """Global handler for unexpected exceptions. Logs the error and returns 500."""
    logger.error(f"Unhandled exception during request {request.url.path}: {exc}", exc_info=True)
    return JSONResponse(
        status_code=500,
        content={"detail": "Internal Server Error"},
    )


@app.exception_handler(ValueError)
async def value_error_handler(request: Request, exc: ValueError):
    """Out-of-domain arguments from the numerical services map to 422."""
    logger.error(f"Invalid argument during request {request.url.path}: {exc}")
    return JSONResponse(
        status_code=422,
        content={"detail": str(exc)},
    )


if __name__ == "__main__":
    uvicorn.run(
        app,
        host=get_settings().fastapi_settings.HOST,
        port=get_settings().fastapi_settings.PORT,
        log_level=get_settings().app_settings.LOG_LEVEL.lower(),
        log_config=LOGGING_CONFIG,
    )
