"""On-disk corpus store shared by the batch pipeline, the CLI, and the service.

Layout under one root directory:
    documents.jsonl
    annotations/<source>.jsonl     one line per document
    logs/resolve-<source>.jsonl
    timing/<doc_id>.json           in-progress refinement timers
"""

import json
import threading
import time
from pathlib import Path
from typing import Optional

from .io import (
    atomic_write_text,
    dumps_annotation_set,
    read_annotation_sets_jsonl,
    read_corpus_jsonl,
    write_corpus_jsonl,
)
from .model import (
    KNOWN_SOURCES,
    AnnotationSet,
    Document,
    TimingRecord,
    make_timing,
)


class Store:
    """All documents and annotation sets for one corpus, persisted as JSONL.

    Writes go through a per-source lock (which also serializes every
    (doc_id, source) key) and land via write-temp-rename, so a crash leaves
    the previous file intact.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.documents: dict[str, Document] = {}
        self.annotations: dict[tuple[str, str], AnnotationSet] = {}
        self.timer_events: dict[str, list[tuple[float, str]]] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._load()

    def _lock(self, source: str) -> threading.Lock:
        with self._locks_guard:
            if source not in self._locks:
                self._locks[source] = threading.Lock()
            return self._locks[source]

    def _load(self) -> None:
        docs_path = self.root / "documents.jsonl"
        if docs_path.exists():
            for doc in read_corpus_jsonl(docs_path):
                self.documents[doc.doc_id] = doc
        ann_dir = self.root / "annotations"
        if ann_dir.is_dir():
            for path in sorted(ann_dir.glob("*.jsonl")):
                for aset in read_annotation_sets_jsonl(path, default_source=path.stem):
                    self.annotations[(aset.doc_id, aset.source)] = aset
        timing_dir = self.root / "timing"
        if timing_dir.is_dir():
            for path in sorted(timing_dir.glob("*.json")):
                obj = json.loads(path.read_text(encoding="utf-8"))
                self.timer_events[path.stem] = [(float(t), str(k)) for t, k in obj.get("events", [])]

    def put_documents(self, docs: list[Document]) -> None:
        for doc in docs:
            self.documents[doc.doc_id] = doc
        write_corpus_jsonl(
            sorted(self.documents.values(), key=lambda d: d.doc_id), self.root / "documents.jsonl"
        )

    def sources_for(self, doc_id: str) -> list[str]:
        return [s for s in KNOWN_SOURCES if (doc_id, s) in self.annotations]

    def get(self, doc_id: str, source: str) -> Optional[AnnotationSet]:
        return self.annotations.get((doc_id, source))

    def put(self, aset: AnnotationSet) -> None:
        with self._lock(aset.source):
            self.annotations[(aset.doc_id, aset.source)] = aset
            self._write_source(aset.source)

    def put_many(self, sets: list[AnnotationSet]) -> None:
        for source in sorted({a.source for a in sets}):
            with self._lock(source):
                for aset in sets:
                    if aset.source == source:
                        self.annotations[(aset.doc_id, aset.source)] = aset
                self._write_source(source)

    def _write_source(self, source: str) -> None:
        rows = [
            dumps_annotation_set(self.annotations[(doc_id, src)])
            for doc_id, src in sorted(self.annotations)
            if src == source
        ]
        atomic_write_text(
            self.root / "annotations" / f"{source}.jsonl", "\n".join(rows) + ("\n" if rows else "")
        )

    def add_timer_event(self, doc_id: str, kind: str, ts: Optional[float] = None) -> TimingRecord:
        events = self.timer_events.setdefault(doc_id, [])
        events.append((time.time() if ts is None else ts, kind))
        atomic_write_text(
            self.root / "timing" / f"{doc_id}.json",
            json.dumps({"events": [[t, k] for t, k in events]}) + "\n",
        )
        return make_timing(events)

    def current_timing(self, doc_id: str) -> Optional[TimingRecord]:
        events = self.timer_events.get(doc_id)
        return make_timing(events) if events else None

    def clear_timer(self, doc_id: str) -> None:
        self.timer_events.pop(doc_id, None)
        path = self.root / "timing" / f"{doc_id}.json"
        if path.exists():
            path.unlink()

    def write_resolve_log(self, source: str, lines: list[str]) -> None:
        atomic_write_text(
            self.root / "logs" / f"resolve-{source}.jsonl", "\n".join(lines) + ("\n" if lines else "")
        )
