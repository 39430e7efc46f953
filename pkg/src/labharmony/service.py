"""HTTP review service for the human-validation loop.

Endpoints (JSON bodies):

* ``GET  /health`` - liveness probe
* ``GET  /queue?status=Pending|Reranked&limit=N&offset=M`` - review queue
* ``GET  /result/{query_id}`` - one query's candidates with all sub-scores
* ``POST /verdict`` ``{query_id, candidate_id|null, verdict, reviewer, force?}``
* ``GET  /stats`` - tag counts and feedback-event count

Verdicts on already-decided items answer 409 unless ``force`` is set;
malformed bodies answer 400, unknown ids 404. When a static directory is
configured the single-page review client is served from ``/``.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import ValidationError
from .pipeline import HarmonizationResult, ReviewConflict, ReviewStore, UnknownQuery
from .types import TagStatus


def _candidate_view(candidate, store: ReviewStore) -> dict:
    view = candidate.as_dict()
    triad = store.triad_of(candidate.record_id)
    view["triad"] = triad.as_dict() if triad else None
    return view


def _queue_item(result: HarmonizationResult, store: ReviewStore) -> dict:
    top = result.candidates[0] if result.candidates else None
    return {
        "query_id": result.query_id,
        "query": result.query.as_dict(),
        "tag": result.tag.value,
        "top": _candidate_view(top, store) if top else None,
        "candidate_count": len(result.candidates),
    }


def _result_view(result: HarmonizationResult, store: ReviewStore) -> dict:
    view = result.as_dict()
    view["candidates"] = [_candidate_view(c, store) for c in result.candidates]
    return view


def create_app(store: ReviewStore, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="labharmony review service", docs_url=None, redoc_url=None)
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/stats")
    def stats() -> dict:
        return store.stats()

    @app.get("/queue")
    def queue(status: str = "Pending,Reranked", limit: int = 50,
              offset: int = 0) -> dict:
        try:
            wanted = [TagStatus.parse(s.strip())
                      for part in status.split("|") for s in part.split(",") if s.strip()]
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if limit < 0 or offset < 0:
            raise HTTPException(status_code=400, detail="limit/offset must be >= 0")
        items = store.queue(statuses=wanted, limit=limit, offset=offset)
        return {"items": [_queue_item(r, store) for r in items],
                "status": [t.value for t in wanted],
                "limit": limit, "offset": offset}

    @app.get("/result/{query_id}")
    def result(query_id: str) -> dict:
        try:
            return _result_view(store.get(query_id), store)
        except UnknownQuery as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/verdict")
    async def verdict(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception as exc:  # malformed JSON
            raise HTTPException(status_code=400, detail="body is not JSON") from exc
        if not isinstance(body, dict):
            raise HTTPException(status_code=400, detail="body must be an object")
        query_id = body.get("query_id")
        verdict_value = body.get("verdict")
        reviewer = body.get("reviewer")
        candidate_id = body.get("candidate_id")
        force = bool(body.get("force", False))
        if not isinstance(query_id, str) or not query_id:
            raise HTTPException(status_code=400, detail="query_id is required")
        if verdict_value not in ("accept", "reject"):
            raise HTTPException(status_code=400, detail="verdict must be accept or reject")
        if not isinstance(reviewer, str) or not reviewer:
            raise HTTPException(status_code=400, detail="reviewer is required")
        if candidate_id is not None and not isinstance(candidate_id, str):
            raise HTTPException(status_code=400, detail="candidate_id must be a string or null")
        with lock:
            try:
                updated = store.decide(query_id, candidate_id, verdict_value,
                                       reviewer, force=force)
            except UnknownQuery as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except ReviewConflict as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except ValidationError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
        return _result_view(updated, store)

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app


def serve(store: ReviewStore, port: int = 8901, static_dir: str | None = None,
          host: str = "127.0.0.1") -> None:
    """Run the review service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(store, static_dir=static_dir), host=host, port=port,
                log_level="warning")
