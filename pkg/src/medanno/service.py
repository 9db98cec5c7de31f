"""Refinement workbench HTTP API over a corpus store."""

from pathlib import Path
from typing import Optional

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from . import analysis, evalsuite
from .io import annotation_set_from_json, annotation_set_to_json
from .model import (
    KNOWN_SOURCES,
    TIMER_KINDS,
    FormatError,
    validate_annotation_set,
)
from .store import Store


def create_app(store: Store, ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="medanno workbench", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def doc_or_404(doc_id: str):
        doc = store.documents.get(doc_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        return doc

    @app.get("/documents")
    def list_documents():
        return [
            {
                "doc_id": doc_id,
                "length": len(store.documents[doc_id].text),
                "sources": store.sources_for(doc_id),
            }
            for doc_id in sorted(store.documents)
        ]

    @app.get("/documents/{doc_id}")
    def get_document(doc_id: str):
        doc = doc_or_404(doc_id)
        return {"doc_id": doc.doc_id, "text": doc.text}

    @app.get("/documents/{doc_id}/annotations/{source}")
    def get_annotations(doc_id: str, source: str):
        doc_or_404(doc_id)
        if source not in KNOWN_SOURCES:
            raise HTTPException(status_code=404, detail=f"unknown source {source!r}")
        aset = store.get(doc_id, source)
        if aset is None:
            raise HTTPException(
                status_code=404, detail=f"no {source!r} annotations for {doc_id!r}"
            )
        return annotation_set_to_json(aset)

    @app.put("/documents/{doc_id}/annotations/refined")
    def put_refined(doc_id: str, payload: dict = Body(...)):
        doc = doc_or_404(doc_id)
        payload = dict(payload)
        payload["doc_id"] = doc_id
        payload["source"] = "refined"
        try:
            aset = annotation_set_from_json(payload, default_source="refined")
        except FormatError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        violations = validate_annotation_set(doc, aset)
        if violations:
            raise HTTPException(
                status_code=400,
                detail={
                    "violations": [
                        {
                            "kind": v.kind,
                            "detail": v.detail,
                            "entry_id": v.entry_id,
                            "field_type": v.field_type.value if v.field_type else None,
                            "start": v.start,
                            "end": v.end,
                        }
                        for v in violations
                    ]
                },
            )
        if aset.timing is None:
            timing = store.current_timing(doc_id)
            if timing is not None:
                from dataclasses import replace

                aset = replace(aset, timing=timing)
        store.put(aset)
        return annotation_set_to_json(aset)

    @app.post("/documents/{doc_id}/timer")
    def post_timer(doc_id: str, payload: dict = Body(...)):
        doc_or_404(doc_id)
        kind = payload.get("kind")
        if kind not in TIMER_KINDS:
            raise HTTPException(
                status_code=400, detail=f"kind must be one of {', '.join(TIMER_KINDS)}"
            )
        timing = store.add_timer_event(doc_id, kind)
        return {"seconds_active": timing.seconds_active, "events": len(timing.events)}

    @app.get("/documents/{doc_id}/diff")
    def get_diff(doc_id: str, base: str = Query(...)):
        doc_or_404(doc_id)
        base_set = store.get(doc_id, base)
        if base_set is None:
            raise HTTPException(status_code=404, detail=f"no {base!r} annotations for {doc_id!r}")
        refined = store.get(doc_id, "refined")
        if refined is None:
            raise HTTPException(status_code=404, detail=f"no refined annotations for {doc_id!r}")
        return analysis.correction_diff_to_json(analysis.diff_corrections(base_set, refined))

    @app.get("/reports/metrics")
    def get_metrics(
        gold: str = Query(...),
        pred: str = Query(...),
        level: str = Query("phrase"),
        mode: str = Query("vertical"),
        include_reason: bool = Query(False),
    ):
        if level not in evalsuite.LEVELS:
            raise HTTPException(status_code=400, detail=f"level must be one of {evalsuite.LEVELS}")
        if mode not in evalsuite.MODES:
            raise HTTPException(status_code=400, detail=f"mode must be one of {evalsuite.MODES}")
        compute = (
            evalsuite.compute_vertical if mode == "vertical" else evalsuite.compute_horizontal
        )
        reports = []
        for doc_id in sorted(store.documents):
            gset = store.get(doc_id, gold)
            pset = store.get(doc_id, pred)
            if gset is None or pset is None:
                continue
            reports.append(
                compute(gset, pset, level=level, include_reason=include_reason)
            )
        report = evalsuite.aggregate(reports, level=level, mode=mode)
        return evalsuite.report_to_json(report)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(store_dir, port: int = 8077, host: str = "127.0.0.1", ui_dir=None) -> None:
    import uvicorn

    app = create_app(Store(store_dir), ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
