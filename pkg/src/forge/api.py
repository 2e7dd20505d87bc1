"""Review API: screening groups, labeling, lineage inspection, and report endpoints.

Every state-changing endpoint appends to a JSONL store; every read replays
those stores, so restarting the server (or rebuilding the app) over the same
files reproduces identical responses. Report endpoints return the canonical
JSON bytes shared with the CLI.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import sample_to_record
from .ingest import IngestError, load_registry, sample_for_screening
from .reports import (
    REPORT_BUILDERS,
    agreement_report,
    build_report,
    canonical_json_bytes,
    sources_report,
)
from .stores import LabelRecord, PipelineStore

log = logging.getLogger(__name__)


class GroupBody(BaseModel):
    group: str
    rater_id: str = "operator"


class LabelBody(BaseModel):
    sample_id: str
    rater_id: str
    label: str


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _canonical(payload: Any) -> Response:
    # Trailing newline kept so CLI `forge report` output is byte-identical.
    return Response(content=canonical_json_bytes(payload) + b"\n",
                    media_type="application/json")


def create_app(
    store: PipelineStore,
    registry_path: Path | str,
    media_root: Path | str | None = None,
    frontend_dir: Path | str | None = None,
) -> FastAPI:
    app = FastAPI(title="forge review API", docs_url=None, redoc_url=None)
    registry_path = Path(registry_path)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return _error(400, f"malformed request: {exc.errors()[:3]}")

    def registry():
        return load_registry(registry_path)

    def spec_for(source_id: str):
        for spec in registry():
            if spec.source_id == source_id:
                return spec
        return None

    @app.get("/api/sources")
    def get_sources() -> Response:
        return _canonical(sources_report(store, registry()))

    @app.get("/api/sources/{source_id}/samples")
    def get_screening_batch(source_id: str, n: int = 20, seed: int = 0):
        spec = spec_for(source_id)
        if spec is None:
            return _error(404, f"unknown source {source_id}")
        try:
            batch = sample_for_screening(spec, n=n, seed=seed)
        except IngestError as exc:
            return _error(404, str(exc))
        return _canonical([sample_to_record(s) for s in batch])

    @app.post("/api/sources/{source_id}/group")
    def post_group(source_id: str, body: GroupBody):
        if spec_for(source_id) is None:
            return _error(404, f"unknown source {source_id}")
        try:
            record = LabelRecord(sample_id=source_id, rater_id=body.rater_id, group=body.group)
        except ValueError as exc:
            return _error(400, str(exc))
        store.append_label(record)
        return _canonical({"source_id": source_id, "group": body.group})

    @app.get("/api/samples")
    def list_samples(provenance: str = "rewritten", n: int = 20, seed: int = 0):
        import random as _random

        if provenance == "rewritten":
            pool = list(store.iter_rewritten())
        elif provenance == "original":
            pool = list(store.iter_originals())
        elif provenance == "kept":
            pool = list(store.iter_kept())
        else:
            return _error(400, f"unknown provenance {provenance!r}")
        pool.sort(key=lambda s: s.id)
        if len(pool) > n:
            pool = _random.Random(seed).sample(pool, n)
        return _canonical([sample_to_record(s) for s in pool])

    @app.get("/api/samples/{sample_id}/lineage")
    def get_lineage(sample_id: str):
        samples = store.load_all_samples()
        sample = samples.get(sample_id)
        if sample is None:
            return _error(404, f"unknown sample {sample_id}")
        root = sample
        if root.parent_id and root.parent_id in samples:
            root = samples[root.parent_id]
        verdicts = {r["sample_id"]: r for r in store.verdict_records()}
        scores = {r["sample_id"]: r for r in store.score_records()}
        children = sorted(store.children_index().get(root.id, []), key=lambda s: s.id)
        return _canonical(
            {
                "original": sample_to_record(root),
                "children": [
                    {
                        "sample": sample_to_record(child),
                        "verdict": verdicts.get(child.id),
                        "score": scores.get(child.id),
                    }
                    for child in children
                ],
                "original_score": scores.get(root.id),
            }
        )

    @app.post("/api/labels")
    def post_label(body: LabelBody):
        samples = store.load_all_samples()
        if body.sample_id not in samples:
            return _error(404, f"unknown sample {body.sample_id}")
        try:
            record = LabelRecord(
                sample_id=body.sample_id, rater_id=body.rater_id, label=body.label
            )
        except ValueError as exc:
            return _error(400, str(exc))
        store.append_label(record)
        return _canonical({"sample_id": body.sample_id, "rater_id": body.rater_id,
                           "label": body.label})

    @app.get("/api/agreement")
    def get_agreement() -> Response:
        return _canonical(agreement_report(store))

    @app.get("/api/reports/{kind}")
    def get_report(kind: str):
        if kind not in REPORT_BUILDERS:
            return _error(404, f"unknown report {kind}")
        return _canonical(build_report(kind, store))

    if media_root is not None:
        media_root = Path(media_root)

        @app.get("/api/media/{ref:path}")
        def get_media(ref: str):
            path = (media_root / ref).resolve()
            if media_root.resolve() not in path.parents and path != media_root.resolve():
                return _error(404, "unknown media")
            if not path.is_file():
                return _error(404, f"unknown media {ref}")
            return FileResponse(path)

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8400) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="info")
