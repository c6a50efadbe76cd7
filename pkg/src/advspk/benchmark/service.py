"""HTTP JSON API for the annotation tool.

Endpoints (the browser client consumes these verbatim):
    GET  /api/next?annotator=ID      next pair descriptor + audio URLs
    POST /api/annotate               one AnnotationRecord (or a skip)
    GET  /api/progress?annotator=ID  completed/remaining/skipped counts
    GET  /api/metrics?subset=A       {eer, auroc, accuracy, n}
    GET  /api/export.csv             all records as CSV
    GET  /audio/{pair_id}/{a|b}      WAV stream

Pair payloads never include the hidden ground-truth label.
"""

import io
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, PlainTextResponse, Response

from ..errors import (DuplicateAnnotation, InvalidScore, NotAssigned,
                      SubsetExhausted)
from .metrics import binary_accuracy, eer_auroc_from_roc, interpolated_roc
from .store import (GRACE_S, TIME_LIMIT_S, AnnotationRecord, BenchmarkSet,
                    RecordStore)


def create_app(benchmark: BenchmarkSet, store: RecordStore,
               audio_root=".", static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="speaker-pair annotation service")
    root = Path(audio_root)
    by_id = benchmark.by_id()
    lock = threading.Lock()

    @app.get("/api/next")
    def next_task(annotator: str):
        with lock:
            try:
                queue = store.assign_pairs(benchmark, annotator)
            except SubsetExhausted:
                claimed = store.claims().get(annotator)
                if claimed is None:
                    raise HTTPException(status_code=409, detail="SubsetExhausted")
                return {"done": True, "remaining_in_subset": 0, "subset": claimed}
            pair = queue[0]
            return {
                "pair_id": pair.pair_id,
                "audio_url_a": f"/audio/{pair.pair_id}/a",
                "audio_url_b": f"/audio/{pair.pair_id}/b",
                "remaining_in_subset": len(queue),
                "time_limit_s": TIME_LIMIT_S,
                "grace_s": GRACE_S,
                "done": False,
            }

    @app.post("/api/annotate")
    def annotate(body: dict):
        required = {"pair_id", "annotator_id"}
        if not required.issubset(body):
            raise HTTPException(status_code=422, detail="missing fields")
        with lock:
            if body.get("skipped"):
                store.record_skip(body["pair_id"], body["annotator_id"],
                                  reason=body.get("reason", "timeout"))
                return {"status": "skipped"}
            try:
                rec = AnnotationRecord(
                    pair_id=body["pair_id"],
                    annotator_id=body["annotator_id"],
                    score=int(body.get("score", -1)),
                    elapsed_s=float(body.get("elapsed_s", 0.0)),
                )
                stored = store.record_annotation(rec, benchmark=benchmark)
            except InvalidScore as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            except DuplicateAnnotation as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except NotAssigned as exc:
                raise HTTPException(status_code=403, detail=str(exc))
            return {"status": "stored", "borderline_used": stored.borderline_used,
                    "overrun": stored.overrun}

    @app.get("/api/progress")
    def progress(annotator: str):
        with lock:
            return store.progress(benchmark, annotator)

    @app.get("/api/metrics")
    def metrics(subset: str = "all"):
        with lock:
            records = store.records()
        if subset != "all":
            wanted = {p.pair_id for p in benchmark.subset_pairs(subset)}
            records = [r for r in records if r.pair_id in wanted]
        if not records:
            return {"subset": subset, "n": 0, "eer": None, "auroc": None,
                    "accuracy": None}
        labels = {p.pair_id: p.label for p in benchmark.pairs}
        try:
            curve = interpolated_roc(records, labels)
            eer, auroc = eer_auroc_from_roc(curve)
            accuracy = binary_accuracy(records, labels)
        except Exception as exc:  # degenerate labels etc.
            raise HTTPException(status_code=409, detail=str(exc))
        return {"subset": subset, "n": len(records), "eer": eer,
                "auroc": auroc, "accuracy": accuracy}

    @app.get("/api/export.csv")
    def export_csv():
        with lock:
            records = store.records()
        buf = io.StringIO()
        buf.write("pair_id,annotator_id,score,elapsed_s,timestamp\n")
        for r in records:
            buf.write(f"{r.pair_id},{r.annotator_id},{r.score},{r.elapsed_s},"
                      f"{r.timestamp}\n")
        return PlainTextResponse(buf.getvalue(), media_type="text/csv")

    @app.get("/audio/{pair_id}/{side}")
    def audio(pair_id: str, side: str):
        pair = by_id.get(pair_id)
        if pair is None or side not in ("a", "b"):
            raise HTTPException(status_code=404, detail="unknown pair or side")
        path = root / (pair.path_a if side == "a" else pair.path_b)
        if not path.exists():
            raise HTTPException(status_code=404, detail="audio file missing")
        return FileResponse(path, media_type="audio/wav")

    if static_dir is not None:
        static = Path(static_dir)

        @app.get("/")
        def index():
            index_path = static / "index.html"
            if not index_path.exists():
                raise HTTPException(status_code=404, detail="UI not built")
            return Response(index_path.read_text(), media_type="text/html")

        @app.get("/static/{name}")
        def static_file(name: str):
            path = static / name
            if not path.exists() or not path.resolve().is_relative_to(static.resolve()):
                raise HTTPException(status_code=404)
            media = "text/javascript" if name.endswith(".js") else "text/css"
            return Response(path.read_text(), media_type=media)

    return app
