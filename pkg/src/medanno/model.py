"""Core annotation data model: documents, field spans, entries, annotation sets."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Optional


class MedannoError(Exception):
    """Base class for errors raised by this package."""


class EmptyAfterStrip(MedannoError):
    """Normalizing a span removed every character."""


class FormatError(MedannoError):
    """An input file does not match the expected format."""


class OffsetError(MedannoError):
    """A span's offsets do not line up with the document text."""


class DocMismatch(MedannoError):
    """Two inputs that must describe the same document do not."""


class FieldType(str, Enum):
    NAME = "name"
    DOSE = "dose"
    MODE = "mode"
    FREQUENCY = "frequency"
    DURATION = "duration"
    REASON = "reason"


# Reason is modeled and carried through every pipeline stage but excluded
# from scoring unless explicitly requested.
SCORING_FIELDS = frozenset(
    {FieldType.NAME, FieldType.DOSE, FieldType.MODE, FieldType.FREQUENCY, FieldType.DURATION}
)

FIELD_ORDER = (
    FieldType.NAME,
    FieldType.DOSE,
    FieldType.MODE,
    FieldType.FREQUENCY,
    FieldType.DURATION,
    FieldType.REASON,
)

KNOWN_SOURCES = (
    "gold",
    "rater-base",
    "llm-iob",
    "llm-direct",
    "llm-ensemble",
    "refined",
)

# Characters trimmed from span edges by normalize_span. Interior characters
# are never touched.
STRIP_CHARS = " \t.,;:!?'\"()[]-"


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


@dataclass(frozen=True)
class FieldSpan:
    """One labeled span, in document character offsets (end exclusive)."""

    field_type: FieldType
    start: int
    end: int
    text: str

    def sort_key(self) -> tuple:
        return (self.start, self.end, FIELD_ORDER.index(self.field_type), self.text)

    def overlap(self, other: "FieldSpan") -> int:
        return max(0, min(self.end, other.end) - max(self.start, other.start))


@dataclass(frozen=True)
class MedicationEntry:
    """A group of spans describing one medication mention."""

    entry_id: str
    fields: tuple[FieldSpan, ...]

    def spans_of(self, field_type: FieldType) -> tuple[FieldSpan, ...]:
        return tuple(s for s in self.fields if s.field_type == field_type)

    def has_name(self) -> bool:
        return any(s.field_type == FieldType.NAME for s in self.fields)


def make_entry(entry_id: str, fields: Iterable[FieldSpan]) -> MedicationEntry:
    """Build an entry with exact-duplicate spans collapsed and a stable field order."""
    seen: dict[FieldSpan, None] = {}
    for s in fields:
        seen.setdefault(s)
    ordered = tuple(sorted(seen, key=FieldSpan.sort_key))
    return MedicationEntry(entry_id=entry_id, fields=ordered)


@dataclass(frozen=True)
class TimingRecord:
    """Active-time bookkeeping for one annotation session.

    events is a sequence of (epoch_seconds, kind) with kind in
    {start, pause, resume, stop}; seconds_active should equal the summed
    start/resume -> pause/stop intervals.
    """

    seconds_active: float
    events: tuple[tuple[float, str], ...] = ()


TIMER_KINDS = ("start", "pause", "resume", "stop")


def active_seconds(events: Iterable[tuple[float, str]]) -> float:
    """Sum the running intervals of a timer event sequence.

    Out-of-order duplicates (start while running, pause while stopped) are
    ignored rather than rejected.
    """
    total = 0.0
    running_since: Optional[float] = None
    for ts, kind in events:
        if kind in ("start", "resume"):
            if running_since is None:
                running_since = ts
        elif kind in ("pause", "stop"):
            if running_since is not None:
                total += ts - running_since
                running_since = None
    return total


def make_timing(events: Iterable[tuple[float, str]]) -> TimingRecord:
    evs = tuple((float(t), str(k)) for t, k in events)
    return TimingRecord(seconds_active=active_seconds(evs), events=evs)


@dataclass(frozen=True)
class AnnotationSet:
    """Every entry and span for one document from one source.

    spans is the full inventory; entries hold references into it (by value,
    FieldSpan is immutable). Spans referenced by no entry are orphans.
    """

    doc_id: str
    source: str
    entries: tuple[MedicationEntry, ...]
    spans: tuple[FieldSpan, ...]
    timing: Optional[TimingRecord] = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def orphans(self) -> tuple[FieldSpan, ...]:
        referenced = {s for e in self.entries for s in e.fields}
        return tuple(s for s in self.spans if s not in referenced)

    def entries_missing_name(self) -> tuple[MedicationEntry, ...]:
        # Kept in the set, but flagged: they cannot take part in entry
        # alignment or ensemble merging.
        return tuple(e for e in self.entries if not e.has_name())


def make_annotation_set(
    doc_id: str,
    source: str,
    entries: Iterable[MedicationEntry] = (),
    orphans: Iterable[FieldSpan] = (),
    timing: Optional[TimingRecord] = None,
    meta: Optional[dict[str, Any]] = None,
) -> AnnotationSet:
    """Canonical constructor: collapses duplicates and sorts the inventory."""
    if source not in KNOWN_SOURCES:
        raise ValueError(f"unknown annotation source {source!r}")
    canon_entries = tuple(make_entry(e.entry_id, e.fields) for e in entries)
    inventory: dict[FieldSpan, None] = {}
    for e in canon_entries:
        for s in e.fields:
            inventory.setdefault(s)
    for s in orphans:
        inventory.setdefault(s)
    spans = tuple(sorted(inventory, key=FieldSpan.sort_key))
    return AnnotationSet(
        doc_id=doc_id,
        source=source,
        entries=canon_entries,
        spans=spans,
        timing=timing,
        meta=dict(meta or {}),
    )


def normalize_span(doc: Document, span: FieldSpan) -> FieldSpan:
    """Trim leading/trailing punctuation, spaces, and tabs off a span.

    Offsets are adjusted to the surviving text; idempotent. Raises
    EmptyAfterStrip when nothing survives.
    """
    start, end = span.start, span.end
    text = doc.text
    while start < end and text[start] in STRIP_CHARS:
        start += 1
    while end > start and text[end - 1] in STRIP_CHARS:
        end -= 1
    if start == end:
        raise EmptyAfterStrip(
            f"span {span.field_type.value} [{span.start},{span.end}) is empty after stripping"
        )
    return FieldSpan(field_type=span.field_type, start=start, end=end, text=text[start:end])


@dataclass(frozen=True)
class Violation:
    kind: str  # offset | text-mismatch | duplicate-span | dangling-reference | doc-mismatch
    detail: str
    entry_id: Optional[str] = None
    field_type: Optional[FieldType] = None
    start: Optional[int] = None
    end: Optional[int] = None


def validate_annotation_set(doc: Document, aset: AnnotationSet) -> list[Violation]:
    """Check every structural invariant; returns an empty list iff well formed.

    Violations are data for reporting layers, not exceptions.
    """
    violations: list[Violation] = []
    if aset.doc_id != doc.doc_id:
        violations.append(
            Violation(kind="doc-mismatch", detail=f"set is for {aset.doc_id!r}, doc is {doc.doc_id!r}")
        )
    n = len(doc.text)
    for span in aset.spans:
        if not (0 <= span.start < span.end <= n):
            violations.append(
                Violation(
                    kind="offset",
                    detail=f"{span.field_type.value} [{span.start},{span.end}) outside document of length {n}",
                    field_type=span.field_type,
                    start=span.start,
                    end=span.end,
                )
            )
            continue
        if doc.text[span.start : span.end] != span.text:
            violations.append(
                Violation(
                    kind="text-mismatch",
                    detail=(
                        f"{span.field_type.value} [{span.start},{span.end}) carries "
                        f"{span.text!r} but document reads {doc.text[span.start:span.end]!r}"
                    ),
                    field_type=span.field_type,
                    start=span.start,
                    end=span.end,
                )
            )
    seen: dict[tuple, FieldSpan] = {}
    for span in aset.spans:
        key = (span.field_type, span.start, span.end)
        if key in seen:
            violations.append(
                Violation(
                    kind="duplicate-span",
                    detail=f"{span.field_type.value} [{span.start},{span.end}) appears more than once",
                    field_type=span.field_type,
                    start=span.start,
                    end=span.end,
                )
            )
        else:
            seen[key] = span
    inventory = set(aset.spans)
    for entry in aset.entries:
        for span in entry.fields:
            if span not in inventory:
                violations.append(
                    Violation(
                        kind="dangling-reference",
                        detail=(
                            f"entry {entry.entry_id!r} references {span.field_type.value} "
                            f"[{span.start},{span.end}) which is not in the span inventory"
                        ),
                        entry_id=entry.entry_id,
                        field_type=span.field_type,
                        start=span.start,
                        end=span.end,
                    )
                )
    return violations


def drop_span(aset: AnnotationSet, span: FieldSpan) -> AnnotationSet:
    """Remove a span from the inventory and from every entry referencing it."""
    entries = tuple(
        make_entry(e.entry_id, tuple(s for s in e.fields if s != span)) for e in aset.entries
    )
    spans = tuple(s for s in aset.spans if s != span)
    return replace(aset, entries=entries, spans=spans)
