"""JSON HTTP API consumed by the web console and external tooling.

Handlers are stateless over shared snapshot reads; writes funnel through
the repository's serialized committer. Run launch is asynchronous: POST
/runs answers 202 immediately and progress is pollable via GET /runs/{id}.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import replace

from fastapi import Body, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import domain
from .config import Config
from .domain import (
    Feedback,
    HumanOverride,
    IssueStatus,
    JudgeTemplate,
    ModelRef,
    Tag,
    TagKind,
    TestSelection,
    as_doc,
    now_iso,
)
from .errors import (
    ConfigError,
    Conflict,
    DuplicateId,
    GatewayError,
    GradelineError,
    NoSharedTests,
    RunNotCompleted,
    StorageUnavailable,
    UnknownId,
    ValidationFailed,
)
from .gateway import InferenceGateway
from .ids import new_id
from .judging import result_with_override
from .orchestrator import RunOrchestrator
from .reports import build_report, compare_reports, comparison_to_doc, report_to_doc, trend_series, trend_to_doc
from .store import Store

logger = logging.getLogger(__name__)

_ERROR_CODES = [
    (UnknownId, 404, "not_found"),
    (ValidationFailed, 400, "validation_failed"),
    (DuplicateId, 409, "conflict"),
    (Conflict, 409, "conflict"),
    (RunNotCompleted, 409, "conflict"),
    (NoSharedTests, 409, "conflict"),
    (GatewayError, 502, "upstream_unavailable"),
    (ConfigError, 400, "validation_failed"),
    (StorageUnavailable, 500, "internal"),
]


def _api_error(status: int, code: str, message: str, detail=None) -> JSONResponse:
    body = {"code": code, "message": message, "detail": detail}
    return JSONResponse(status_code=status, content=body)


def parse_tag(value) -> Tag:
    """Accept {kind,value} objects, "kind:value" strings, or bare values.

    A bare value becomes a domain tag when it is in the domain vocabulary,
    otherwise a custom tag.
    """
    if isinstance(value, dict):
        return Tag(kind=TagKind(value["kind"]), value=str(value["value"]))
    text = str(value)
    if ":" in text:
        kind, _, rest = text.partition(":")
        try:
            return Tag(kind=TagKind(kind), value=rest)
        except ValueError:
            pass  # not a kind prefix; treat the whole string as a value
    if text in domain.domain_vocabulary():
        return Tag(kind=TagKind.DOMAIN, value=text)
    return Tag(kind=TagKind.CUSTOM, value=text)


def expand_query_tag(value: str) -> set[Tag]:
    """A bare query value matches that value under any tag kind."""
    if isinstance(value, str) and ":" not in value:
        return {Tag(kind=k, value=value) for k in TagKind}
    return {parse_tag(value)}


def create_app(
    store: Store,
    gateway: InferenceGateway | None = None,
    config: Config | None = None,
) -> FastAPI:
    config = config or Config()
    gateway = gateway or InferenceGateway(config)
    orchestrator = RunOrchestrator(store, gateway, config)
    app = FastAPI(title="gradeline", version="0.1.0")
    app.state.store = store
    app.state.gateway = gateway
    app.state.config = config
    app.state.orchestrator = orchestrator
    app.state.run_threads = {}

    def parse_model(value) -> ModelRef:
        if isinstance(value, str):
            return config.model_ref(value)
        if not isinstance(value, dict):
            raise ValidationFailed(
                "model must be a config name or a model object",
                [("model", "must be a name or object")],
            )
        try:
            return domain.model_ref_from_doc(value)
        except (KeyError, ValueError, TypeError) as exc:
            raise ValidationFailed(
                f"invalid model reference: {exc}", [("model", "invalid reference")]
            ) from None

    # -- error mapping -----------------------------------------------------

    @app.exception_handler(GradelineError)
    async def on_domain_error(request: Request, exc: GradelineError):
        for cls, status, code in _ERROR_CODES:
            if isinstance(exc, cls):
                detail = None
                if isinstance(exc, ValidationFailed) and exc.violations:
                    detail = [{"field": f, "rule": r} for f, r in exc.violations]
                return _api_error(status, code, str(exc), detail)
        logger.exception("unhandled domain error", exc_info=exc)
        return _api_error(500, "internal", str(exc))

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(request: Request, exc: RequestValidationError):
        return _api_error(400, "validation_failed", "invalid request", exc.errors())

    @app.exception_handler(StarletteHTTPException)
    async def on_http_error(request: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "internal"
        return _api_error(exc.status_code, code, str(exc.detail))

    @app.exception_handler(Exception)
    async def on_unexpected(request: Request, exc: Exception):
        logger.exception("unhandled error", exc_info=exc)
        return _api_error(500, "internal", "internal error")

    # -- issues --------------------------------------------------------------

    @app.get("/issues")
    def list_issues(
        tag: list[str] = Query(default=[]),
        status: str | None = None,
        q: str | None = None,
        limit: int = 200,
        offset: int = 0,
    ):
        tags: set[Tag] = set()
        for value in tag:
            tags |= expand_query_tag(value)
        status_enum = IssueStatus(status) if status else None
        issues = store.list_issues(tags=tags or None, status=status_enum, text=q)
        return {"issues": [as_doc(i) for i in issues[offset : offset + limit]], "total": len(issues)}

    def _list_field(payload: dict, key: str) -> list:
        value = payload.get(key, [])
        if not isinstance(value, list):
            raise ValidationFailed(f"{key} must be a list", [(key, "must be a list")])
        return value

    @app.post("/issues", status_code=201)
    def create_issue(payload: dict = Body(...)):
        tags = frozenset(parse_tag(t) for t in _list_field(payload, "tags"))
        issue = store.create_issue(
            title=payload.get("title", ""),
            description=payload.get("description", ""),
            tags=tags,
        )
        for fb in _list_field(payload, "feedback"):
            issue = store.attach_feedback(issue.id, _feedback_from_payload(fb))
        return as_doc(issue)

    @app.get("/issues/{issue_id}")
    def get_issue(issue_id: str):
        issue = store.get_issue(issue_id)
        doc = as_doc(issue)
        doc["tests"] = [as_doc(t) for t in store.tests_for_issue(issue_id)]
        doc["feedback"] = [as_doc(store.get_feedback(f)) for f in issue.feedback_ids]
        return doc

    @app.patch("/issues/{issue_id}")
    def patch_issue(issue_id: str, payload: dict = Body(...)):
        issue = store.get_issue(issue_id)
        if "status" in payload:
            issue = domain.transition_issue_status(issue, payload["status"])
        updates = {}
        if "title" in payload:
            updates["title"] = payload["title"]
        if "description" in payload:
            updates["description"] = payload["description"]
        if "tags" in payload:
            updates["tags"] = frozenset(parse_tag(t) for t in _list_field(payload, "tags"))
        if updates:
            issue = replace(issue, **updates)
        return as_doc(store.update_issue(issue))

    @app.post("/issues/{issue_id}/tests", status_code=201)
    def add_test(issue_id: str, payload: dict = Body(...)):
        guidelines = payload.get("judge_guidelines")
        if guidelines is not None and not isinstance(guidelines, list):
            raise ValidationFailed(
                "judge_guidelines must be a list of lines", [("judge_guidelines", "must be a list")]
            )
        if not guidelines and payload.get("inherit_from"):
            guidelines = list(store.get_test(payload["inherit_from"]).judge_guidelines)
        try:
            template = JudgeTemplate(payload.get("judge_template", ""))
        except ValueError:
            raise ValidationFailed(
                f"unknown judge_template {payload.get('judge_template')!r}",
                [("judge_template", "must be T1, T2, or T3")],
            ) from None
        test = store.add_test(
            issue_id=issue_id,
            input_prompt=payload.get("input_prompt", ""),
            reference_answer=payload.get("reference_answer"),
            judge_template=template,
            judge_guidelines=tuple(guidelines or ()),
        )
        return as_doc(test)

    @app.post("/issues/{issue_id}/feedback", status_code=201)
    def attach_feedback(issue_id: str, payload: dict = Body(...)):
        issue = store.attach_feedback(issue_id, _feedback_from_payload(payload))
        return as_doc(issue)

    def _feedback_from_payload(payload: dict) -> Feedback:
        return Feedback(
            id=payload.get("id") or new_id(),
            user_input=payload.get("user_input", ""),
            model_output=payload.get("model_output", ""),
            signal=domain.FeedbackSignal(payload.get("signal", "thumbs_down")),
            source_model=payload.get("source_model", ""),
            received_at=payload.get("received_at") or now_iso(),
        )

    # -- tests ------------------------------------------------------------------

    @app.get("/tests")
    def list_tests(tag: list[str] = Query(default=[])):
        tags: set[Tag] = set()
        for value in tag:
            tags |= expand_query_tag(value)
        return {"tests": [as_doc(t) for t in store.list_tests(tags=tags or None)]}

    # -- runs ---------------------------------------------------------------------

    @app.post("/runs", status_code=202)
    def launch_run(payload: dict = Body(...)):
        if not payload.get("target_model"):
            raise ValidationFailed("target_model is required", [("target_model", "required")])
        target = parse_model(payload["target_model"])
        judges = [parse_model(m) for m in _list_field(payload, "judge_models")]
        selection_doc = payload.get("selection") or {}
        if not isinstance(selection_doc, dict):
            raise ValidationFailed("selection must be an object", [("selection", "must be an object")])
        selection = TestSelection(
            tags=frozenset(
                t for value in selection_doc.get("tags", []) for t in expand_query_tag(value)
            ),
            test_ids=frozenset(selection_doc.get("test_ids", [])),
            issue_ids=frozenset(selection_doc.get("issue_ids", [])),
        )
        run = orchestrator.start_run(target, judges, selection)
        thread = threading.Thread(
            target=_execute_quietly, args=(orchestrator, run.id), daemon=True
        )
        app.state.run_threads[run.id] = thread
        thread.start()
        return {"run_id": run.id, "status": run.status.value}

    @app.get("/runs")
    def list_runs():
        return {"runs": [as_doc(r) for r in store.list_runs()]}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return as_doc(store.get_run(run_id))

    @app.get("/runs/{run_id}/report")
    def run_report(run_id: str):
        return report_to_doc(build_report(store, run_id))

    @app.get("/runs/{run_id}/results")
    def run_results(run_id: str):
        return {"results": [as_doc(r) for r in store.results_for_run(run_id)]}

    # -- overrides -------------------------------------------------------------------

    @app.post("/results/{result_id}/override")
    def override_result(result_id: str, payload: dict = Body(...)):
        result = store.get_result(result_id)
        override = HumanOverride(
            score=payload.get("score", -1),
            justification=payload.get("justification", ""),
            annotator=payload.get("annotator", ""),
            created_at=now_iso(),
        )
        updated = result_with_override(result, override)
        return as_doc(store.update_result(updated))

    # -- analytics ----------------------------------------------------------------------

    @app.get("/compare")
    def compare(a: str, b: str):
        return comparison_to_doc(compare_reports(store, a, b))

    @app.get("/trend")
    def trend(runs: str, group_by: str = "overall"):
        run_ids = [r for r in runs.split(",") if r]
        if group_by not in ("overall", "domain"):
            raise ValidationFailed(
                f"group_by must be overall or domain, got {group_by!r}",
                [("group_by", "must be overall or domain")],
            )
        return {"series": trend_to_doc(trend_series(store, run_ids, group_by))}

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "revision": store.snapshot().revision}

    return app


def _execute_quietly(orchestrator: RunOrchestrator, run_id: str) -> None:
    try:
        orchestrator.execute_run(run_id)
    except Exception:
        logger.exception("run %s aborted", run_id)


def serve(config: Config, store: Store | None = None, expose: bool = False) -> None:
    """Run the HTTP service; binds to localhost unless explicitly exposed."""
    import uvicorn

    store = store or Store(config.data_dir)
    app = create_app(store, InferenceGateway(config), config)
    host = "0.0.0.0" if expose else config.host
    uvicorn.run(app, host=host, port=config.port, log_level="info")
