from fastapi import APIRouter, Body, Depends, Query
from fastapi.responses import Response

from api.v1.schemas.asymptotics import NuSource
from api.v1.schemas.offspring import LawFile
from api.v1.services.offspring import from_law_file
from api.v1.services.reports import ReportService
from api.v1.dependencies.analysis import get_report_service
from core.logging import get_logger
from core.utils import dumps_json

logger = get_logger(__name__)

analysis_router = APIRouter()


def _json(result) -> Response:
    return Response(content=dumps_json(result), media_type="application/json")


@analysis_router.post("/analyze")
def analyze(
    law_file: LawFile = Body(...),
    s: list[float] | None = Query(None),
    n_max: int | None = Query(None, ge=0),
    tol: float | None = Query(None, gt=0),
    j_max: int | None = Query(None, ge=1),
    renormalize: bool = Query(False),
    report_service: ReportService = Depends(get_report_service),
) -> Response:
    """
    Full report: parameters, limit estimate, bounds, invariant measures and the K discrepancy.
    """
    law = from_law_file(law_file, renormalize=renormalize)
    return _json(report_service.analyze(law, s, n_max, tol, j_max))


@analysis_router.post("/limit")
def limit(
    law_file: LawFile = Body(...),
    s: list[float] | None = Query(None),
    n_max: int | None = Query(None, ge=0),
    tol: float | None = Query(None, gt=0),
    renormalize: bool = Query(False),
    report_service: ReportService = Depends(get_report_service),
) -> Response:
    law = from_law_file(law_file, renormalize=renormalize)
    return _json(report_service.limit(law, s, n_max, tol))


@analysis_router.post("/bounds")
def bounds(
    law_file: LawFile = Body(...),
    s: list[float] | None = Query(None),
    n_max: int | None = Query(None, ge=0),
    renormalize: bool = Query(False),
    report_service: ReportService = Depends(get_report_service),
) -> Response:
    law = from_law_file(law_file, renormalize=renormalize)
    return _json(report_service.bounds(law, s, n_max))


@analysis_router.post("/invariant")
def invariant(
    law_file: LawFile = Body(...),
    mode: NuSource = Query(NuSource.closed_form),
    j_max: int | None = Query(None, ge=1),
    renormalize: bool = Query(False),
    report_service: ReportService = Depends(get_report_service),
) -> Response:
    law = from_law_file(law_file, renormalize=renormalize)
    return _json(report_service.invariant(law, mode, j_max))


@analysis_router.post("/qprocess")
def qprocess(
    law_file: LawFile = Body(...),
    steps: int = Query(10, ge=0),
    i: int = Query(1, ge=1),
    seed: int | None = Query(None, ge=0, lt=2**64),
    j_max: int | None = Query(None, ge=1),
    renormalize: bool = Query(False),
    report_service: ReportService = Depends(get_report_service),
) -> Response:
    law = from_law_file(law_file, renormalize=renormalize)
    return _json(report_service.qprocess(law, steps, i, seed, j_max))


@analysis_router.post("/simulate")
def simulate(
    law_file: LawFile = Body(...),
    n: int = Query(12, ge=0),
    reps: int | None = Query(None, ge=1),
    seed: int | None = Query(None, ge=0, lt=2**64),
    renormalize: bool = Query(False),
    report_service: ReportService = Depends(get_report_service),
) -> Response:
    law = from_law_file(law_file, renormalize=renormalize)
    return _json(report_service.simulate(law, n, reps, seed))


@analysis_router.post("/verify")
def verify(
    law_file: LawFile = Body(...),
    renormalize: bool = Query(False),
    report_service: ReportService = Depends(get_report_service),
) -> Response:
    """
    Verification ledger. A failed identity is reported in the body, not as an error status.
    """
    law = from_law_file(law_file, renormalize=renormalize)
    ledger = report_service.verify(law)
    if not ledger.passed:
        logger.warning("Verification ledger has failing identities")
    return _json(ledger)
