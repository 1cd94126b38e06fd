from api.v1.endpoints.analysis import analysis_router
