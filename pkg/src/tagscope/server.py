"""HTTP/JSON annotation service.

Endpoints:
  GET  /api/batch?annotator=ID   next unfinished batch for the annotator
                                 (payload carries item_id/text/options only)
  POST /api/answers              persist one batch worth of answers
  GET  /api/report               study report; requires the admin token

Answers are append-only line-delimited JSON (annotator_id, item_id, selected,
timestamp) replayed at startup, so a restart loses nothing.  Batch
assignments are persisted the same way in a sidecar file; each batch is
served to at most `annotators_per_batch` annotators.
"""
from __future__ import annotations

import json
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .annotation import (AnnotationBatch, AnnotatorAnswer, error_class_report,
                         read_answer_log)


class StudyStore:
    """In-memory study state backed by append-only JSONL logs."""

    def __init__(self, batches: Sequence[AnnotationBatch], *,
                 answer_log: Path, assignment_log: Path | None = None,
                 annotators_per_batch: int = 3):
        self.batches = list(batches)
        self.by_id = {b.batch_id: b for b in self.batches}
        self.items = {it.item_id: b.batch_id for b in self.batches for it in b.items}
        self.annotators_per_batch = annotators_per_batch
        self.answer_log = Path(answer_log)
        self.assignment_log = (Path(assignment_log) if assignment_log is not None
                               else self.answer_log.with_suffix(".assignments.jsonl"))
        self.lock = threading.Lock()
        self.answers: list[AnnotatorAnswer] = []
        self.submitted: set[tuple[str, str]] = set()  # (annotator, item_id)
        self.assigned: dict[str, list[str]] = {b.batch_id: [] for b in self.batches}
        self._replay()

    def _replay(self) -> None:
        if self.assignment_log.exists():
            with open(self.assignment_log, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    doc = json.loads(line)
                    self._assign(doc["annotator_id"], doc["batch_id"], persist=False)
        if self.answer_log.exists():
            for ans in read_answer_log(self.answer_log):
                self.answers.append(ans)
                self.submitted.add((ans.annotator_id, ans.item_id))
                # answers imply an assignment even if the sidecar was lost
                batch_id = self.items.get(ans.item_id)
                if batch_id is not None:
                    self._assign(ans.annotator_id, batch_id, persist=False)

    def _assign(self, annotator: str, batch_id: str, persist: bool = True) -> None:
        slots = self.assigned[batch_id]
        if annotator in slots:
            return
        slots.append(annotator)
        if persist:
            with open(self.assignment_log, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"annotator_id": annotator,
                                     "batch_id": batch_id}) + "\n")
                fh.flush()

    def _complete(self, annotator: str, batch: AnnotationBatch) -> bool:
        return all((annotator, it.item_id) in self.submitted for it in batch.items)

    def next_batch(self, annotator: str) -> AnnotationBatch | None:
        with self.lock:
            for batch in self.batches:
                if annotator in self.assigned[batch.batch_id] and \
                        not self._complete(annotator, batch):
                    return batch
            for batch in self.batches:
                slots = self.assigned[batch.batch_id]
                if annotator not in slots and len(slots) < self.annotators_per_batch:
                    self._assign(annotator, batch.batch_id)
                    return batch
        return None

    def progress(self, annotator: str) -> dict:
        with self.lock:
            assigned = [b for b in self.batches
                        if annotator in self.assigned[b.batch_id]]
            done = sum(self._complete(annotator, b) for b in assigned)
        return {"assigned": len(assigned), "completed": done,
                "total_batches": len(self.batches)}

    def record_answers(self, annotator: str, batch: AnnotationBatch,
                       entries: list[tuple[str, tuple[str, ...]]]) -> int:
        """Validate and persist a submission atomically; raises Duplicate on
        any already-answered (annotator, item)."""
        now = datetime.now(timezone.utc).isoformat()
        with self.lock:
            for item_id, _ in entries:
                if (annotator, item_id) in self.submitted:
                    raise Duplicate(f"{annotator} already answered {item_id}")
            answers = [AnnotatorAnswer(annotator, item_id, selected, now)
                       for item_id, selected in entries]
            with open(self.answer_log, "a", encoding="utf-8") as fh:
                for ans in answers:
                    fh.write(json.dumps(ans.to_json(), ensure_ascii=False) + "\n")
                fh.flush()
            for ans in answers:
                self.answers.append(ans)
                self.submitted.add((ans.annotator_id, ans.item_id))
            self._assign(annotator, batch.batch_id)
        return len(answers)

    def snapshot_answers(self) -> list[AnnotatorAnswer]:
        with self.lock:
            return list(self.answers)


class Duplicate(Exception):
    pass


def create_app(batches: Sequence[AnnotationBatch], *, answer_log: str | Path,
               annotators_per_batch: int = 3, admin_token: str | None = None,
               static_dir: str | Path | None = None) -> FastAPI:
    store = StudyStore(batches, answer_log=Path(answer_log),
                       annotators_per_batch=annotators_per_batch)
    app = FastAPI(title="tagscope annotation service")
    app.state.store = store

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed payload"})

    @app.get("/api/batch")
    def get_batch(annotator: str = ""):
        if not annotator.strip():
            return JSONResponse(status_code=400,
                                content={"detail": "annotator id required"})
        batch = store.next_batch(annotator)
        progress = store.progress(annotator)
        if batch is None:
            return {"batch": None, "done": True, "progress": progress}
        return {"batch": batch.public_view(), "done": False, "progress": progress}

    @app.post("/api/answers")
    async def post_answers(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"detail": "malformed JSON"})
        if not isinstance(payload, dict):
            return JSONResponse(status_code=400, content={"detail": "malformed payload"})
        annotator = payload.get("annotator")
        batch_id = payload.get("batch_id")
        answers = payload.get("answers")
        if not isinstance(annotator, str) or not annotator.strip() or \
                not isinstance(batch_id, str) or not isinstance(answers, list) or \
                not answers:
            return JSONResponse(status_code=400, content={"detail": "malformed payload"})
        batch = store.by_id.get(batch_id)
        if batch is None:
            return JSONResponse(status_code=404,
                                content={"detail": f"unknown batch {batch_id}"})
        item_ids = {it.item_id for it in batch.items}
        entries: list[tuple[str, tuple[str, ...]]] = []
        for entry in answers:
            if not isinstance(entry, dict):
                return JSONResponse(status_code=400,
                                    content={"detail": "malformed answer entry"})
            item_id = entry.get("item_id")
            selected = entry.get("selected")
            if not isinstance(item_id, str) or not isinstance(selected, list) or \
                    not selected or not all(isinstance(s, str) for s in selected):
                return JSONResponse(status_code=400,
                                    content={"detail": "empty or malformed selection"})
            if item_id not in item_ids:
                return JSONResponse(status_code=404,
                                    content={"detail": f"unknown item {item_id}"})
            options = set(batch.item(item_id).options)
            if not set(selected) <= options:
                return JSONResponse(status_code=400,
                                    content={"detail": "selection outside option set"})
            entries.append((item_id, tuple(selected)))
        try:
            accepted = store.record_answers(annotator, batch, entries)
        except Duplicate as err:
            return JSONResponse(status_code=409, content={"detail": str(err)})
        return {"accepted": accepted}

    @app.get("/api/report")
    def get_report(request: Request):
        token = request.headers.get("x-admin-token")
        if admin_token is None or token != admin_token:
            return JSONResponse(status_code=403, content={"detail": "admin only"})
        report = error_class_report(store.batches, store.snapshot_answers())
        return report.to_json()

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=Path(static_dir), html=True),
                  name="ui")

    return app


def serve(app: FastAPI, port: int) -> None:
    import uvicorn
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
