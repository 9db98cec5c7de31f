"""Scoring: span-only (vertical) and entry-aware (horizontal) metrics at
phrase or token granularity, with micro-aggregation across documents."""

import csv
import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .model import (
    SCORING_FIELDS,
    AnnotationSet,
    DocMismatch,
    FIELD_ORDER,
    FieldSpan,
    FieldType,
    MedannoError,
    MedicationEntry,
)

LEVELS = ("phrase", "token")
MODES = ("vertical", "horizontal")


class MixedConfig(MedannoError):
    """Reports with different level/mode settings cannot be aggregated."""


def f_beta(precision: float, recall: float, beta: float) -> float:
    """Weighted harmonic mean of precision and recall; 0 when both are 0."""
    denom = beta * beta * precision + recall
    if denom == 0:
        return 0.0
    return (1 + beta * beta) * precision * recall / denom


@dataclass(frozen=True)
class MetricCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        total = self.tp + self.fp
        return self.tp / total if total else 0.0

    @property
    def recall(self) -> float:
        total = self.tp + self.fn
        return self.tp / total if total else 0.0

    @property
    def f1(self) -> float:
        return f_beta(self.precision, self.recall, 1.0)

    @property
    def f2(self) -> float:
        return f_beta(self.precision, self.recall, 2.0)

    def plus(self, other: "MetricCounts") -> "MetricCounts":
        return MetricCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class MetricsReport:
    level: str
    mode: str
    overall: MetricCounts
    per_field: dict[FieldType, MetricCounts]
    doc_count: int


# One countable unit: a span key plus the entry it sits in (None for
# orphans). A span shared by two entries yields two incidences, which is what
# makes entry-level credit assignment meaningful; with no sharing this
# reduces to plain span counting.
_SpanKey = tuple[FieldType, int, int]
_Incidence = tuple[_SpanKey, Optional[int]]

_TOKEN = re.compile(r"\S+")


def _span_tokens(span: FieldSpan) -> list[tuple[int, int]]:
    return [(span.start + m.start(), span.start + m.end()) for m in _TOKEN.finditer(span.text)]


def _keys_for(span: FieldSpan, level: str) -> list[_SpanKey]:
    if level == "phrase":
        return [(span.field_type, span.start, span.end)]
    return [(span.field_type, s, e) for s, e in _span_tokens(span)]


def _incidences(aset: AnnotationSet, level: str, fields: frozenset) -> list[_Incidence]:
    out: list[_Incidence] = []
    for idx, entry in enumerate(aset.entries):
        for span in entry.fields:
            if span.field_type in fields:
                out.extend((key, idx) for key in _keys_for(span, level))
    for span in aset.orphans:
        if span.field_type in fields:
            out.extend((key, None) for key in _keys_for(span, level))
    out.sort(key=lambda inc: (inc[0][1], inc[0][2], FIELD_ORDER.index(inc[0][0]), -1 if inc[1] is None else inc[1]))
    return out


def _entry_alignment(gold: AnnotationSet, pred: AnnotationSet) -> dict[int, Optional[int]]:
    """Map each predicted entry to the gold entry with maximal Name-span
    character overlap; leftmost gold wins ties, no overlap means unaligned."""
    gold_names = [
        (gi, [s for s in e.fields if s.field_type == FieldType.NAME]) for gi, e in enumerate(gold.entries)
    ]
    alignment: dict[int, Optional[int]] = {}
    for pi, pe in enumerate(pred.entries):
        pred_names = [s for s in pe.fields if s.field_type == FieldType.NAME]
        best: Optional[tuple[int, int, int]] = None  # (-overlap, leftmost gold name start, gold idx)
        for gi, names in gold_names:
            if not names:
                continue
            overlap = max((pn.overlap(gn) for pn in pred_names for gn in names), default=0)
            if overlap >= 1:
                cand = (-overlap, min(n.start for n in names), gi)
                if best is None or cand < best:
                    best = cand
        alignment[pi] = best[2] if best is not None else None
    return alignment


def _check_pair(gold: AnnotationSet, pred: AnnotationSet) -> None:
    if gold.doc_id != pred.doc_id:
        raise DocMismatch(f"gold is for {gold.doc_id!r}, prediction for {pred.doc_id!r}")


def _scored_fields(include_reason: bool) -> frozenset:
    return frozenset(FIELD_ORDER) if include_reason else SCORING_FIELDS


def _tally(pred_inc, gold_inc, pred_key, gold_key, fields) -> dict[FieldType, MetricCounts]:
    # Greedy one-to-one consumption in document order; with exact-equality
    # edges this attains the maximum bipartite matching.
    remaining: dict = {}
    for inc in gold_inc:
        k = gold_key(inc)
        remaining[k] = remaining.get(k, 0) + 1
    tp = {ft: 0 for ft in fields}
    fp = {ft: 0 for ft in fields}
    fn = {ft: 0 for ft in fields}
    for inc in pred_inc:
        k = pred_key(inc)
        ft = inc[0][0]
        if remaining.get(k, 0) > 0:
            remaining[k] -= 1
            tp[ft] += 1
        else:
            fp[ft] += 1
    for k, count in remaining.items():
        if count > 0:
            fn[k[0][0]] += count
    return {ft: MetricCounts(tp=tp[ft], fp=fp[ft], fn=fn[ft]) for ft in fields}


def _report(per_field: dict[FieldType, MetricCounts], level: str, mode: str) -> MetricsReport:
    overall = MetricCounts()
    for counts in per_field.values():
        overall = overall.plus(counts)
    return MetricsReport(level=level, mode=mode, overall=overall, per_field=per_field, doc_count=1)


def compute_vertical(
    gold: AnnotationSet, pred: AnnotationSet, level: str = "phrase", include_reason: bool = False
) -> MetricsReport:
    """Pure span extraction quality: entry structure is ignored."""
    _check_pair(gold, pred)
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    fields = _scored_fields(include_reason)
    pred_inc = _incidences(pred, level, fields)
    gold_inc = _incidences(gold, level, fields)
    key = lambda inc: (inc[0],)
    per_field = _tally(pred_inc, gold_inc, key, key, fields)
    return _report(per_field, level, "vertical")


def compute_horizontal(
    gold: AnnotationSet, pred: AnnotationSet, level: str = "phrase", include_reason: bool = False
) -> MetricsReport:
    """Entry-aware quality: a prediction only counts when its entry aligns
    with the gold entry holding the matched gold span. Spans in unaligned or
    name-less entries, and orphan predictions, can only be false positives."""
    _check_pair(gold, pred)
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    fields = _scored_fields(include_reason)
    alignment = _entry_alignment(gold, pred)
    pred_inc = _incidences(pred, level, fields)
    gold_inc = _incidences(gold, level, fields)

    def pred_key(inc: _Incidence):
        key, entry_idx = inc
        aligned = alignment.get(entry_idx) if entry_idx is not None else None
        return (key, aligned if aligned is not None else ("-",))

    def gold_key(inc: _Incidence):
        key, entry_idx = inc
        return (key, entry_idx if entry_idx is not None else ("+",))

    per_field = _tally(pred_inc, gold_inc, pred_key, gold_key, fields)
    return _report(per_field, level, "horizontal")


def aggregate(
    reports: Iterable[MetricsReport], level: Optional[str] = None, mode: Optional[str] = None
) -> MetricsReport:
    """Micro-aggregate per-document reports by summing counts.

    An empty input yields a zero-count report at the given (or default)
    level and mode.
    """
    reports = list(reports)
    if not reports:
        lvl = level or "phrase"
        md = mode or "vertical"
        return MetricsReport(level=lvl, mode=md, overall=MetricCounts(), per_field={}, doc_count=0)
    lvl, md = reports[0].level, reports[0].mode
    if (level and level != lvl) or (mode and mode != md):
        raise MixedConfig(f"reports are {lvl}/{md}, requested {level}/{mode}")
    per_field: dict[FieldType, MetricCounts] = {}
    doc_count = 0
    for rep in reports:
        if rep.level != lvl or rep.mode != md:
            raise MixedConfig(f"cannot mix {rep.level}/{rep.mode} with {lvl}/{md}")
        doc_count += rep.doc_count
        for ft, counts in rep.per_field.items():
            per_field[ft] = per_field.get(ft, MetricCounts()).plus(counts)
    overall = MetricCounts()
    for counts in per_field.values():
        overall = overall.plus(counts)
    return MetricsReport(level=lvl, mode=md, overall=overall, per_field=per_field, doc_count=doc_count)


def _counts_json(counts: MetricCounts) -> dict:
    return {
        "tp": counts.tp,
        "fp": counts.fp,
        "fn": counts.fn,
        "precision": counts.precision,
        "recall": counts.recall,
        "f1": counts.f1,
        "f2": counts.f2,
    }


def report_to_json(report: MetricsReport) -> dict:
    return {
        "level": report.level,
        "mode": report.mode,
        "doc_count": report.doc_count,
        "overall": _counts_json(report.overall),
        "per_field": {
            ft.value: _counts_json(report.per_field[ft]) for ft in FIELD_ORDER if ft in report.per_field
        },
    }


CSV_COLUMNS = ("level", "mode", "field", "tp", "fp", "fn", "precision", "recall", "f1", "f2")


def report_to_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)

    def row(name: str, counts: MetricCounts):
        writer.writerow(
            [
                report.level,
                report.mode,
                name,
                counts.tp,
                counts.fp,
                counts.fn,
                f"{counts.precision:.6f}",
                f"{counts.recall:.6f}",
                f"{counts.f1:.6f}",
                f"{counts.f2:.6f}",
            ]
        )

    row("overall", report.overall)
    for ft in FIELD_ORDER:
        if ft in report.per_field:
            row(ft.value, report.per_field[ft])
    return buf.getvalue()
