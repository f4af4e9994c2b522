"""HTTP layer: JSON session API for interactive annotation.

Endpoints:
    POST /sessions                create a session
    GET  /sessions/{id}           full state snapshot
    POST /sessions/{id}/query     propose the next query (marks it pending)
    POST /sessions/{id}/labels    submit a label for the pending query
    GET  /sessions/{id}/export    CSV of history and predictions

Errors are JSON objects {"code": ..., "message": ...} with conventional
status codes (404 unknown session, 409 conflicts, 413 resource limits,
400 everything else caller-fixable).
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import (
    EmptyPoolError,
    GraphActiveError,
    IdxFormatError,
    InvalidParameterError,
    InvalidQueryError,
    ResourceLimitError,
)
from .sessions import (
    MalformedUploadError,
    SessionConfig,
    SessionConflictError,
    SessionManager,
    UnknownSessionError,
)

DEFAULT_DATA_DIR = "graphactive-sessions"

_ERROR_CODES = [
    (UnknownSessionError, 404, "unknown-session"),
    (SessionConflictError, 409, "conflict"),
    (InvalidQueryError, 409, "invalid-query"),
    (ResourceLimitError, 413, "resource-limit"),
    (MalformedUploadError, 400, "malformed-upload"),
    (IdxFormatError, 400, "idx-format"),
    (EmptyPoolError, 409, "empty-pool"),
    (InvalidParameterError, 400, "invalid-parameter"),
    (GraphActiveError, 400, "error"),
]


class DatasetSpec(BaseModel):
    name: str
    n: int | None = None
    grid: int | None = None
    seed: int | None = None
    per_digit: int | None = None
    images_path: str | None = None
    labels_path: str | None = None
    csv: str | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class SessionSettings(BaseModel):
    update_mode: str = "na"
    tau: float = 1.0
    gamma: float = 0.1
    noise_family: str = "gaussian-cdf"
    graph: str = "full"
    knn_k: int = 15
    length_scale: float = 0.05
    laplacian_kind: str = "unnormalized"
    hf_jitter: float = 0.0
    free_labeling: bool = False
    snapshot_every: int = 10
    seed: int = 0


class SeedLabels(BaseModel):
    per_class: int | None = None
    seed: int = 0
    indices: list[int] | None = None
    labels: list[int] | None = None

    def as_dict(self) -> dict | None:
        if self.indices is not None:
            return {"indices": self.indices, "labels": self.labels or []}
        if self.per_class is not None:
            return {"per_class": self.per_class, "seed": self.seed}
        return None


class CreateSessionRequest(BaseModel):
    dataset: DatasetSpec
    model: str = "probit"
    acquisition: str = "mc"
    config: SessionSettings = Field(default_factory=SessionSettings)
    seed_labels: SeedLabels | None = None


class CreateSessionResponse(BaseModel):
    id: str
    n_nodes: int
    dataset_name: str
    display_coords: list[list[float]] | None
    accuracy: float | None


class LabelRequest(BaseModel):
    index: int
    label: int


def create_app(manager: SessionManager | None = None, frontend_dir: str | None = None) -> FastAPI:
    if manager is None:
        manager = SessionManager(os.environ.get("GRAPHACTIVE_DATA_DIR", DEFAULT_DATA_DIR))
    app = FastAPI(title="graphactive annotation service")
    app.state.manager = manager

    @app.exception_handler(GraphActiveError)
    async def _domain_error(request: Request, exc: GraphActiveError):
        for klass, status, code in _ERROR_CODES:
            if isinstance(exc, klass):
                return JSONResponse(
                    status_code=status, content={"code": code, "message": str(exc)}
                )
        return JSONResponse(status_code=500, content={"code": "internal", "message": str(exc)})

    @app.post("/sessions", response_model=CreateSessionResponse)
    def create_session(req: CreateSessionRequest):
        cfg = SessionConfig(
            model=req.model,
            acquisition=req.acquisition,
            **req.config.model_dump(),
        )
        seeds = req.seed_labels.as_dict() if req.seed_labels is not None else None
        state = manager.create(req.dataset.as_dict(), cfg, seeds)
        coords = state.dataset.display_coords
        return CreateSessionResponse(
            id=state.id,
            n_nodes=state.dataset.n,
            dataset_name=state.dataset.name,
            display_coords=coords.tolist() if coords is not None else None,
            accuracy=state.accuracy_curve[-1] if state.accuracy_curve else None,
        )

    @app.get("/sessions/{sid}")
    def get_state(sid: str):
        return manager.snapshot(manager.get(sid))

    @app.post("/sessions/{sid}/query")
    def next_query(sid: str):
        return manager.next_query(manager.get(sid))

    @app.post("/sessions/{sid}/labels")
    def submit_label(sid: str, req: LabelRequest):
        return manager.submit_label(manager.get(sid), req.index, req.label)

    @app.get("/sessions/{sid}/export")
    def export(sid: str):
        csv = manager.export_csv(manager.get(sid))
        return PlainTextResponse(csv, media_type="text/csv")

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app


app = create_app()
