"""HTTP/JSON facade over the workflow service.

Thin by design: request bodies are validated here, every domain rule lives in
the service, and domain errors map onto stable status codes with a JSON body
of the form {"error": <type>, "detail": <message>}.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .data import SchemaMismatch
from .lmt import LmtError, TrainParams
from .service import (
    ActionSubmission,
    BadFilter,
    DegenerateExport,
    DuplicateActionId,
    DuplicateFlag,
    FeedbackFlag,
    NoActiveModel,
    ServiceError,
    UnknownRecord,
    UnknownVersion,
    WorkflowService,
    record_to_dict,
)

_STATUS = {
    NoActiveModel: 503,
    DuplicateActionId: 409,
    DuplicateFlag: 409,
    DegenerateExport: 409,
    UnknownRecord: 404,
    UnknownVersion: 404,
    BadFilter: 400,
    SchemaMismatch: 422,
    LmtError: 422,
    ServiceError: 422,
}


class ActionIn(BaseModel):
    action_id: str
    actor_id: str
    features: dict[str, float]
    raw_context: str | None = None


class FeedbackIn(BaseModel):
    member_id: str
    verdict: str
    comment: str | None = None


class RetrainIn(BaseModel):
    seed: int = 0
    max_boost_iters: int = 200
    cv_folds_for_iters: int = 5
    min_split: int = 15
    max_depth: int = 10
    z_max: float = 3.0
    prune: bool = True


def _parse_flag(raw: str | None, name: str) -> bool | None:
    if raw is None:
        return None
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise BadFilter(f"{name} must be a boolean, got {raw!r}")


def create_app(service: WorkflowService) -> FastAPI:
    app = FastAPI(title="norm-violation moderation service")

    def _on_error(request: Request, exc: Exception) -> JSONResponse:
        status = 422
        for klass, code in _STATUS.items():
            if isinstance(exc, klass):
                status = code
                break
        return JSONResponse(status_code=status,
                            content={"error": type(exc).__name__,
                                     "detail": str(exc)})

    for klass in _STATUS:
        app.add_exception_handler(klass, _on_error)

    @app.post("/actions", status_code=201)
    def submit_action(body: ActionIn) -> dict:
        sub = ActionSubmission(action_id=body.action_id, actor_id=body.actor_id,
                               features=body.features, raw_context=body.raw_context)
        return record_to_dict(service.evaluate_action(sub))

    @app.get("/records")
    def list_records(decision: str | None = None, flagged: str | None = None,
                     since: str | None = None, page: int = 0,
                     page_size: int = 50) -> dict:
        result = service.list_records(decision=decision,
                                      flagged=_parse_flag(flagged, "flagged"),
                                      since=since, page=page, page_size=page_size)
        return {
            "records": [record_to_dict(r) for r in result.records],
            "page": result.page,
            "page_size": result.page_size,
            "total": result.total,
        }

    @app.get("/records/{record_id}")
    def get_record(record_id: str) -> dict:
        return record_to_dict(service.get_record(record_id))

    @app.post("/records/{record_id}/feedback")
    def post_feedback(record_id: str, body: FeedbackIn) -> dict:
        flag = FeedbackFlag(member_id=body.member_id, verdict=body.verdict,
                            comment=body.comment)
        return record_to_dict(service.flag_feedback(record_id, flag))

    @app.get("/metrics")
    def metrics() -> dict:
        return service.service_metrics()

    @app.post("/admin/retrain", status_code=201)
    def retrain(body: RetrainIn) -> dict:
        version = service.retrain(TrainParams(**body.model_dump()))
        return {"version": version, "active": service.active_version()}

    @app.post("/admin/activate/{version}")
    def activate(version: str) -> dict:
        return {"active": service.activate(version)}

    return app
