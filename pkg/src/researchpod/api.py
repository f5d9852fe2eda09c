"""HTTP front door: engagement creation, SSE progress, library listings,
graph queries, artifact retrieval.

Every route is a thin projection over the Engine facade; the CLI drives the
same facade directly, so identical requests behave identically through either
entry point. Read endpoints are pure against a store snapshot. Binds to
loopback by default and carries no auth; put a reverse proxy in front if the
service ever leaves the workstation.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import graph as kg
from .engine import Engine
from .errors import ResearchPodError, UnknownIdError, ValidationError

CITATION_PATTERN = re.compile(r"\[\[artifact:([0-9a-f]{64})\]\]")

# HTTP status by error code; anything unmapped is a 500.
_STATUS_BY_CODE = {
    "validation": 400,
    "unresolvable-need": 400,
    "dangling-parent": 400,
    "duplicate-id": 409,
    "unknown-id": 404,
    "missing-producer": 400,
    "cycle-detected": 400,
}


class EngagementRequest(BaseModel):
    workflow_id: str
    ticker: str
    persona_id: str | None = None
    engagement_type: str | None = None
    params: dict = Field(default_factory=dict)
    seed: int = 0


def _task_summary(graph) -> list[dict]:
    tasks = [graph.tasks[task_id] for task_id in graph.topo_order()]
    return [
        {
            "id": task.id,
            "skill": task.skill,
            "phase": task.phase.value,
            "status": task.status.value,
            "attempt_count": task.attempt_count,
        }
        for task in tasks
    ]


def _sse_frame(event) -> str:
    data = {
        "engagement_id": event.engagement_id,
        "task_id": event.task_id,
        "sequence_no": event.sequence_no,
        "timestamp": event.timestamp,
        "detail": event.detail,
    }
    return (
        f"id: {event.sequence_no}\n"
        f"event: {event.event}\n"
        f"data: {json.dumps(data, separators=(',', ':'))}\n\n"
    )


def create_app(engine: Engine, static_dir: Path | str | None = None) -> FastAPI:
    app = FastAPI(title="researchpod", docs_url=None, redoc_url=None)

    @app.exception_handler(ResearchPodError)
    async def _engine_error(request: Request, exc: ResearchPodError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(
            status_code=status, content={"error": exc.code, "detail": str(exc)}
        )

    # ------------------------------------------------------------------
    # Engagements

    @app.post("/engagements", status_code=202)
    def create_engagement(request: EngagementRequest, http_request: Request):
        if not request.workflow_id.strip():
            raise ValidationError("workflow_id must be non-empty")
        key = http_request.headers.get("Idempotency-Key")
        try:
            record = engine.create_engagement(
                request.workflow_id,
                request.ticker,
                persona=request.persona_id,
                params=request.params,
                engagement_type=request.engagement_type,
                idempotency_key=key,
                seed=request.seed,
            )
        except UnknownIdError as exc:
            # A create request naming an unknown persona or workflow is a bad
            # request, not a failed lookup.
            raise ValidationError(str(exc)) from exc
        engine.start_engagement(record.engagement_id)
        graph = engine.load_graph(record.engagement_id)
        return {
            "engagement_id": record.engagement_id,
            "status": record.status,
            "tasks": _task_summary(graph),
        }

    @app.get("/engagements")
    def list_engagements():
        return {"engagements": [r.to_dict() for r in engine.list_engagements()]}

    @app.get("/engagements/{engagement_id}")
    def get_engagement(engagement_id: str):
        record = engine.get_engagement(engagement_id)
        graph = engine.load_graph(engagement_id)
        return {**record.to_dict(), "tasks": _task_summary(graph)}

    @app.post("/engagements/{engagement_id}/resume", status_code=202)
    def resume_engagement(engagement_id: str):
        engine.get_engagement(engagement_id)  # 404 before spawning anything
        engine.start_engagement(engagement_id, resume=True)
        return {"engagement_id": engagement_id, "status": "resuming"}

    @app.get("/engagements/{engagement_id}/events")
    def stream_events(
        engagement_id: str, http_request: Request, timeout: float | None = None
    ):
        last_id = http_request.headers.get("Last-Event-ID")
        after = 0
        if last_id:
            try:
                after = int(last_id)
            except ValueError:
                raise ValidationError(f"bad Last-Event-ID: {last_id!r}")
        subscription = engine.subscribe(engagement_id, after=after, timeout=timeout)

        def frames():
            for event in subscription:
                yield _sse_frame(event)

        return StreamingResponse(
            frames(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    # ------------------------------------------------------------------
    # Libraries

    @app.get("/skills")
    def list_skills():
        skills = [spec.to_dict() for spec in engine.registry.list_skills()]
        by_phase: dict[str, list[str]] = {}
        by_runner: dict[str, list[str]] = {}
        for spec in skills:
            by_phase.setdefault(spec["phase"], []).append(spec["id"])
            by_runner.setdefault(spec["runner"], []).append(spec["id"])
        return {"skills": skills, "by_phase": by_phase, "by_runner": by_runner}

    @app.get("/personas")
    def list_personas():
        return {"personas": [p.to_dict() for p in engine.registry.list_personas()]}

    @app.post("/personas", status_code=201)
    def onboard_persona(manifest: dict):
        references = manifest.pop("references", None)
        if references is not None and not isinstance(references, dict):
            raise ValidationError("references must map note names to text")
        pack = engine.onboard_pack_manifest(manifest, references=references)
        return pack.to_dict()

    @app.get("/workflows")
    def list_workflows():
        templates = sorted(engine.templates.list_templates(), key=lambda t: t.id)
        return {"workflows": [t.to_dict() for t in templates]}

    @app.get("/data-sources")
    def list_data_sources():
        return {"sources": engine.list_data_sources()}

    # ------------------------------------------------------------------
    # Knowledge graph

    @app.get("/graph")
    def get_graph():
        graph = kg.rebuild(engine.store)
        export = graph.to_export()
        return {**export, "counts": graph.counts(), "warnings": list(graph.warnings)}

    @app.get("/graph/gaps")
    def get_gaps():
        return {"gaps": kg.gap_report(kg.rebuild(engine.store))}

    @app.get("/graph/themes/{theme_key}")
    def get_theme(theme_key: str):
        return kg.theme_view(kg.rebuild(engine.store), theme_key)

    @app.get("/graph/tickers/{ticker}/compare")
    def compare_ticker(ticker: str):
        return {"ticker": ticker, "views": kg.compare_views(kg.rebuild(engine.store), ticker)}

    # ------------------------------------------------------------------
    # Artifacts and memos

    @app.get("/artifacts/{artifact_id}")
    def get_artifact(artifact_id: str):
        artifact = engine.store.get(artifact_id)
        body: dict = {
            "id": artifact.id,
            "category": artifact.category,
            "engagement_id": artifact.engagement_id,
            "producer_skill": artifact.producer_skill,
            "producer_task": artifact.producer_task,
            "parent_ids": list(artifact.parent_ids),
            "created_at": artifact.created_at,
            "payload_kind": artifact.payload_kind,
            "lineage": kg.provenance_chain(engine.store, artifact.id),
        }
        if artifact.payload_kind == "structured":
            body["payload"] = artifact.data()
        else:
            body["text"] = artifact.text()
        return body

    @app.get("/memos/{memo_id}")
    def get_memo(memo_id: str):
        artifact = engine.store.get(memo_id)
        if artifact.category != "memo":
            raise UnknownIdError(f"artifact {memo_id} is not a memo")
        text = artifact.text()
        citations = []
        for cited in sorted(set(CITATION_PATTERN.findall(text))):
            resolved = cited in engine.store
            entry = {"id": cited, "resolved": resolved}
            if resolved:
                source = engine.store.get(cited)
                entry["category"] = source.category
                entry["producer_skill"] = source.producer_skill
            citations.append(entry)
        return {
            "id": artifact.id,
            "engagement_id": artifact.engagement_id,
            "ticker": artifact.ticker(),
            "created_at": artifact.created_at,
            "text": text,
            "citations": citations,
            "lineage": kg.provenance_chain(engine.store, artifact.id),
        }

    # ------------------------------------------------------------------
    # Misc

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "artifacts": len(engine.store)}

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

        @app.get("/", include_in_schema=False)
        def index() -> Response:
            return Response(status_code=307, headers={"Location": "/ui/"})

    return app


def serve(
    workspace: Path | str,
    *,
    host: str = "127.0.0.1",
    port: int = 8400,
    fixtures_root: Path | str | None = None,
    live_sources: bool = False,
    max_workers: int = 4,
    static_dir: Path | str | None = None,
) -> None:
    """Blocking uvicorn launcher used by the CLI serve command."""
    import uvicorn

    engine = Engine(
        workspace,
        fixtures_root=fixtures_root,
        live_sources=live_sources,
        max_workers=max_workers,
    )
    app = create_app(engine, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
