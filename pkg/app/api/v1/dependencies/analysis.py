from api.v1.services.reports import ReportService


def get_report_service() -> ReportService:
    return ReportService()
