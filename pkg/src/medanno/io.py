"""Reading and writing the on-disk formats: corpus JSONL, annotation JSONL, standoff import."""

import json
import logging
import os
import re
from pathlib import Path
from typing import Any, Iterable, Optional

from .model import (
    AnnotationSet,
    Document,
    EmptyAfterStrip,
    FieldSpan,
    FieldType,
    FormatError,
    MedicationEntry,
    OffsetError,
    TimingRecord,
    make_annotation_set,
    make_entry,
    normalize_span,
)

log = logging.getLogger(__name__)

DOCUMENTS_FILE = "documents.jsonl"
ANNOTATIONS_FILE = "annotations.jsonl"


def atomic_write_text(path: Path, content: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(content, encoding="utf-8")
    os.replace(tmp, path)


def document_to_json(doc: Document) -> dict:
    return {"doc_id": doc.doc_id, "text": doc.text}


def document_from_json(obj: dict) -> Document:
    return Document(doc_id=str(obj["doc_id"]), text=str(obj["text"]))


def span_to_json(span: FieldSpan) -> dict:
    return {
        "field_type": span.field_type.value,
        "start": span.start,
        "end": span.end,
        "text": span.text,
    }


def span_from_json(obj: dict) -> FieldSpan:
    try:
        ft = FieldType(str(obj["field_type"]).lower())
        start = int(obj["start"])
        end = int(obj["end"])
        text = str(obj["text"])
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"bad field span {obj!r}: {exc}") from exc
    return FieldSpan(field_type=ft, start=start, end=end, text=text)


def annotation_set_to_json(aset: AnnotationSet) -> dict:
    obj: dict[str, Any] = {
        "doc_id": aset.doc_id,
        "source": aset.source,
        "entries": [
            {"entry_id": e.entry_id, "fields": [span_to_json(s) for s in e.fields]}
            for e in aset.entries
        ],
        "orphans": [span_to_json(s) for s in aset.orphans],
    }
    if aset.timing is not None:
        timing: dict[str, Any] = {"seconds_active": aset.timing.seconds_active}
        if aset.timing.events:
            timing["events"] = [{"t": t, "kind": k} for t, k in aset.timing.events]
        obj["timing"] = timing
    if aset.meta:
        obj["meta"] = {k: aset.meta[k] for k in sorted(aset.meta)}
    return obj


def annotation_set_from_json(obj: dict, default_source: str = "gold") -> AnnotationSet:
    try:
        doc_id = str(obj["doc_id"])
    except KeyError as exc:
        raise FormatError(f"annotation object missing doc_id: {obj!r}") from exc
    source = str(obj.get("source", default_source))
    entries = []
    for eobj in obj.get("entries", []):
        if "entry_id" not in eobj:
            raise FormatError(f"entry without entry_id in {doc_id!r}")
        entries.append(
            make_entry(str(eobj["entry_id"]), [span_from_json(s) for s in eobj.get("fields", [])])
        )
    orphans = [span_from_json(s) for s in obj.get("orphans", [])]
    timing: Optional[TimingRecord] = None
    tobj = obj.get("timing")
    if tobj is not None:
        events = tuple((float(e["t"]), str(e["kind"])) for e in tobj.get("events", []))
        timing = TimingRecord(seconds_active=float(tobj.get("seconds_active", 0.0)), events=events)
    meta = dict(obj.get("meta", {}))
    return make_annotation_set(doc_id, source, entries, orphans, timing, meta)


def dumps_annotation_set(aset: AnnotationSet) -> str:
    return json.dumps(annotation_set_to_json(aset), ensure_ascii=False)


def write_corpus_jsonl(docs: Iterable[Document], path: Path) -> None:
    lines = [json.dumps(document_to_json(d), ensure_ascii=False) for d in docs]
    atomic_write_text(Path(path), "\n".join(lines) + ("\n" if lines else ""))


def read_corpus_jsonl(path: Path) -> list[Document]:
    docs = []
    for lineno, obj in _iter_jsonl(Path(path)):
        if "text" not in obj:
            raise FormatError(f"{path}:{lineno}: document line without text")
        docs.append(document_from_json(obj))
    return docs


def write_annotation_sets_jsonl(sets: Iterable[AnnotationSet], path: Path) -> None:
    lines = [dumps_annotation_set(a) for a in sets]
    atomic_write_text(Path(path), "\n".join(lines) + ("\n" if lines else ""))


def read_annotation_sets_jsonl(path: Path, default_source: str = "gold") -> list[AnnotationSet]:
    sets = []
    for lineno, obj in _iter_jsonl(Path(path)):
        try:
            sets.append(annotation_set_from_json(obj, default_source=default_source))
        except FormatError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return sets


def _iter_jsonl(path: Path):
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise FormatError(f"{path}:{lineno}: expected an object")
        yield lineno, obj


def import_gold_corpus(path, format: str = "jsonl") -> tuple[list[Document], list[AnnotationSet]]:
    """Load a reference corpus plus its gold annotations into canonical form.

    Every imported span is edge-normalized; spans that vanish entirely and
    discontinuous standoff fields are dropped with a logged count. Span text
    that disagrees with the document raises OffsetError.
    """
    path = Path(path)
    if format == "jsonl":
        docs, sets = _import_jsonl(path)
    elif format == "i2b2":
        docs, sets = _import_standoff_dir(path)
    else:
        raise FormatError(f"unknown corpus format {format!r}")

    by_id = {d.doc_id: d for d in docs}
    out_sets = []
    dropped_empty = 0
    for aset in sets:
        doc = by_id.get(aset.doc_id)
        if doc is None:
            raise FormatError(f"annotations for unknown document {aset.doc_id!r}")
        entries = []
        for entry in aset.entries:
            kept = []
            for span in entry.fields:
                _check_span_against(doc, span)
                try:
                    kept.append(normalize_span(doc, span))
                except EmptyAfterStrip:
                    dropped_empty += 1
            if kept:
                entries.append(make_entry(entry.entry_id, kept))
        orphans = []
        for span in aset.orphans:
            _check_span_against(doc, span)
            try:
                orphans.append(normalize_span(doc, span))
            except EmptyAfterStrip:
                dropped_empty += 1
        out_sets.append(
            make_annotation_set(aset.doc_id, aset.source, entries, orphans, aset.timing, aset.meta)
        )
    if dropped_empty:
        log.info("dropped %d spans that were empty after edge normalization", dropped_empty)
    return docs, out_sets


def _check_span_against(doc: Document, span: FieldSpan) -> None:
    if not (0 <= span.start < span.end <= len(doc.text)):
        raise OffsetError(
            f"{doc.doc_id}: {span.field_type.value} [{span.start},{span.end}) "
            f"outside document of length {len(doc.text)}"
        )
    actual = doc.text[span.start : span.end]
    if actual != span.text:
        raise OffsetError(
            f"{doc.doc_id}: {span.field_type.value} [{span.start},{span.end}) "
            f"claims {span.text!r} but document reads {actual!r}"
        )


def _import_jsonl(path: Path) -> tuple[list[Document], list[AnnotationSet]]:
    if path.is_dir():
        docs = read_corpus_jsonl(path / DOCUMENTS_FILE)
        ann_path = path / ANNOTATIONS_FILE
        sets = read_annotation_sets_jsonl(ann_path) if ann_path.exists() else []
        return docs, sets
    # Single file: each line may be a document, an annotation set, or both.
    docs, sets = [], []
    for lineno, obj in _iter_jsonl(path):
        saw = False
        if "text" in obj:
            docs.append(document_from_json(obj))
            saw = True
        if "entries" in obj or "orphans" in obj:
            try:
                sets.append(annotation_set_from_json(obj))
            except FormatError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            saw = True
        if not saw:
            raise FormatError(f"{path}:{lineno}: line is neither a document nor annotations")
    return docs, sets


# Standoff import: one text file per document plus a <doc_id>.m label file of
# ||-separated fields like m="lasix" 37:4 37:4, with line:token offsets
# (lines 1-based, tokens 0-based).

_STANDOFF_KEYS = {
    "m": FieldType.NAME,
    "do": FieldType.DOSE,
    "mo": FieldType.MODE,
    "f": FieldType.FREQUENCY,
    "du": FieldType.DURATION,
    "r": FieldType.REASON,
}

_STANDOFF_PART = re.compile(r'^\s*(\w+)="(.*)"\s*(.*)$', re.DOTALL)
_OFFSET_PAIR = re.compile(r"^(\d+):(\d+)\s+(\d+):(\d+)$")


def _import_standoff_dir(path: Path) -> tuple[list[Document], list[AnnotationSet]]:
    if not path.is_dir():
        raise FormatError(f"standoff import expects a directory, got {path}")
    docs = []
    sets = []
    dropped_discontinuous = 0
    label_files = {p.stem: p for p in sorted(path.iterdir()) if p.suffix == ".m"}
    text_files = [p for p in sorted(path.iterdir()) if p.suffix != ".m" and p.is_file()]
    if not text_files:
        raise FormatError(f"no document files in {path}")
    for tf in text_files:
        doc_id = tf.stem if tf.suffix == ".txt" else tf.name
        doc = Document(doc_id=doc_id, text=tf.read_text(encoding="utf-8"))
        docs.append(doc)
        lf = label_files.get(doc_id)
        if lf is None:
            continue
        token_spans = _token_spans_by_line(doc.text)
        entries = []
        for lineno, line in enumerate(lf.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            fields = []
            for part in line.split("||"):
                m = _STANDOFF_PART.match(part)
                if m is None:
                    raise FormatError(f"{lf}:{lineno}: cannot parse field {part!r}")
                key, value, offsets = m.group(1), m.group(2), m.group(3).strip()
                ft = _STANDOFF_KEYS.get(key)
                if ft is None:
                    continue  # narrative/list tags are not modeled
                if value == "nm" or not offsets:
                    continue
                ranges = [r.strip() for r in offsets.split(",") if r.strip()]
                if len(ranges) > 1:
                    dropped_discontinuous += 1
                    continue
                span = _standoff_range_to_span(doc, token_spans, ft, value, ranges[0], lf, lineno)
                fields.append(span)
            if fields:
                entries.append(make_entry(f"{doc_id}-m{len(entries) + 1}", fields))
        sets.append(make_annotation_set(doc_id, "gold", entries))
    if dropped_discontinuous:
        log.info("dropped %d discontinuous gold fields", dropped_discontinuous)
    return docs, sets


def _token_spans_by_line(text: str) -> list[list[tuple[int, int]]]:
    spans: list[list[tuple[int, int]]] = []
    offset = 0
    for line in text.split("\n"):
        row = [(offset + m.start(), offset + m.end()) for m in re.finditer(r"\S+", line)]
        spans.append(row)
        offset += len(line) + 1
    return spans


def _standoff_range_to_span(
    doc: Document,
    token_spans: list[list[tuple[int, int]]],
    ft: FieldType,
    value: str,
    rng: str,
    label_path: Path,
    lineno: int,
) -> FieldSpan:
    m = _OFFSET_PAIR.match(rng)
    if m is None:
        raise FormatError(f"{label_path}:{lineno}: bad offset range {rng!r}")
    l1, t1, l2, t2 = (int(g) for g in m.groups())
    try:
        start = token_spans[l1 - 1][t1][0]
        end = token_spans[l2 - 1][t2][1]
    except IndexError as exc:
        raise OffsetError(
            f"{doc.doc_id}: {ft.value} offsets {rng} point outside the document"
        ) from exc
    if end <= start:
        raise OffsetError(f"{doc.doc_id}: {ft.value} offsets {rng} are reversed")
    actual = doc.text[start:end]
    # Standoff values are lowercased and whitespace-collapsed; compare modulo that.
    if " ".join(value.lower().split()) != " ".join(actual.lower().split()):
        raise OffsetError(
            f"{doc.doc_id}: {ft.value} [{start},{end}) converts to {actual!r} "
            f"but the record says {value!r}"
        )
    return FieldSpan(field_type=ft, start=start, end=end, text=actual)


def export_corpus(docs: list[Document], sets: list[AnnotationSet], out_dir: Path) -> None:
    """Write a directory that import_gold_corpus(..., 'jsonl') reads back."""
    out_dir = Path(out_dir)
    write_corpus_jsonl(sorted(docs, key=lambda d: d.doc_id), out_dir / DOCUMENTS_FILE)
    write_annotation_sets_jsonl(
        sorted(sets, key=lambda a: (a.doc_id, a.source)), out_dir / ANNOTATIONS_FILE
    )
