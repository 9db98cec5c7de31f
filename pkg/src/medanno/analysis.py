"""Statistical analysis: paired-output significance testing, correction
diffs between annotation passes, and active-time regression."""

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .model import (
    AnnotationSet,
    DocMismatch,
    FIELD_ORDER,
    FieldSpan,
    FieldType,
    MedannoError,
    SCORING_FIELDS,
)
from .evalsuite import _entry_alignment, _span_tokens

STATISTICS = ("precision", "recall", "f1")


class DegenerateDesign(MedannoError):
    """The regression design matrix cannot be estimated."""


class OutputItem(NamedTuple):
    """One countable output unit, hashable so methods' outputs form sets.

    entry_key carries the aligned gold entry for horizontal comparisons and
    stays None for vertical ones.
    """

    doc_id: str
    field_type: str
    start: int
    end: int
    entry_key: Optional[str] = None


@dataclass(frozen=True)
class MetricSpec:
    mode: str = "vertical"  # vertical | horizontal
    level: str = "phrase"  # phrase | token
    statistic: str = "f1"  # precision | recall | f1


@dataclass(frozen=True)
class SignificanceResult:
    delta_observed: float
    p_value: float
    n_resamples: int
    percentile_95: float
    seed: int


def _pair_by_doc(gold: Sequence[AnnotationSet], pred: Sequence[AnnotationSet]):
    gold_by = {a.doc_id: a for a in gold}
    pred_by = {a.doc_id: a for a in pred}
    missing = set(gold_by) ^ set(pred_by)
    if missing:
        raise DocMismatch(f"documents present on one side only: {sorted(missing)}")
    return [(gold_by[d], pred_by[d]) for d in sorted(gold_by)]


def _keys_of(span: FieldSpan, level: str) -> list[tuple[str, int, int]]:
    if level == "phrase":
        return [(span.field_type.value, span.start, span.end)]
    return [(span.field_type.value, s, e) for s, e in _span_tokens(span)]


def gold_items(gold: Sequence[AnnotationSet], spec: MetricSpec, include_reason: bool = False) -> set:
    fields = frozenset(FIELD_ORDER) if include_reason else SCORING_FIELDS
    items: set[OutputItem] = set()
    for aset in gold:
        for gi, entry in enumerate(aset.entries):
            for span in entry.fields:
                if span.field_type not in fields:
                    continue
                ek = f"g{gi}" if spec.mode == "horizontal" else None
                items.update(
                    OutputItem(aset.doc_id, ft, s, e, ek) for ft, s, e in _keys_of(span, spec.level)
                )
        for span in aset.orphans:
            if span.field_type not in fields:
                continue
            ek = "~orphan" if spec.mode == "horizontal" else None
            items.update(
                OutputItem(aset.doc_id, ft, s, e, ek) for ft, s, e in _keys_of(span, spec.level)
            )
    return items


def prediction_items(
    gold: Sequence[AnnotationSet],
    pred: Sequence[AnnotationSet],
    spec: MetricSpec,
    include_reason: bool = False,
) -> set:
    fields = frozenset(FIELD_ORDER) if include_reason else SCORING_FIELDS
    items: set[OutputItem] = set()
    for gset, pset in _pair_by_doc(gold, pred):
        alignment = _entry_alignment(gset, pset) if spec.mode == "horizontal" else {}
        for pi, entry in enumerate(pset.entries):
            if spec.mode == "horizontal":
                gi = alignment.get(pi)
                ek = f"g{gi}" if gi is not None else "~unaligned"
            else:
                ek = None
            for span in entry.fields:
                if span.field_type not in fields:
                    continue
                items.update(
                    OutputItem(pset.doc_id, ft, s, e, ek) for ft, s, e in _keys_of(span, spec.level)
                )
        for span in pset.orphans:
            if span.field_type not in fields:
                continue
            ek = "~unaligned" if spec.mode == "horizontal" else None
            items.update(
                OutputItem(pset.doc_id, ft, s, e, ek) for ft, s, e in _keys_of(span, spec.level)
            )
    return items


def _statistic(tp: float, n_pred: float, n_gold: float, statistic: str) -> float:
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gold if n_gold else 0.0
    if statistic == "precision":
        return precision
    if statistic == "recall":
        return recall
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def randomization_test(
    gold: Sequence[AnnotationSet],
    pred_a: Sequence[AnnotationSet],
    pred_b: Sequence[AnnotationSet],
    spec: MetricSpec = MetricSpec(),
    n_resamples: int = 1000,
    seed: int = 0,
) -> SignificanceResult:
    """Approximate randomization over the two methods' disagreement items.

    Shared outputs stay fixed; each item unique to one method is reassigned
    by a fair coin per resample. One-sided p-value with add-one smoothing:
    (1 + #{delta' >= delta}) / (n + 1). Identical outputs short-circuit to
    p = 1.0. Deterministic for a given seed; resample streams are split from
    the seed so the result does not depend on evaluation order.
    """
    if spec.statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {spec.statistic!r}")
    g = gold_items(gold, spec)
    o_a = prediction_items(gold, pred_a, spec)
    o_b = prediction_items(gold, pred_b, spec)

    shared = o_a & o_b
    unique = sorted(o_a ^ o_b)
    n_gold = len(g)
    tp_shared = len(shared & g)

    delta = _statistic(len(o_a & g), len(o_a), n_gold, spec.statistic) - _statistic(
        len(o_b & g), len(o_b), n_gold, spec.statistic
    )
    if not unique:
        return SignificanceResult(
            delta_observed=delta,
            p_value=1.0,
            n_resamples=n_resamples,
            percentile_95=0.0,
            seed=seed,
        )

    in_g = np.array([item in g for item in unique], dtype=bool)
    n_shared = len(shared)

    streams = np.random.SeedSequence(seed).spawn(n_resamples)
    deltas = np.empty(n_resamples, dtype=float)
    for i in range(n_resamples):
        rng = np.random.default_rng(streams[i])
        to_a = rng.random(len(unique)) < 0.5
        tp_a = tp_shared + int(np.count_nonzero(in_g & to_a))
        tp_b = tp_shared + int(np.count_nonzero(in_g & ~to_a))
        size_a = n_shared + int(np.count_nonzero(to_a))
        size_b = n_shared + len(unique) - int(np.count_nonzero(to_a))
        deltas[i] = _statistic(tp_a, size_a, n_gold, spec.statistic) - _statistic(
            tp_b, size_b, n_gold, spec.statistic
        )
    n_ge = int(np.count_nonzero(deltas >= delta))
    p = (1 + n_ge) / (n_resamples + 1)
    return SignificanceResult(
        delta_observed=float(delta),
        p_value=float(p),
        n_resamples=n_resamples,
        percentile_95=float(np.percentile(deltas, 95)),
        seed=seed,
    )


def significance_to_json(result: SignificanceResult, spec: MetricSpec) -> dict:
    return {
        "metric": f"{spec.mode}/{spec.level}/{spec.statistic}",
        "delta": result.delta_observed,
        "p_value": result.p_value,
        "percentile_95": result.percentile_95,
        "n": result.n_resamples,
        "seed": result.seed,
    }


@dataclass(frozen=True)
class CorrectionItem:
    kind: str  # added | modified | deleted
    field_type: FieldType
    base: Optional[FieldSpan] = None
    refined: Optional[FieldSpan] = None


@dataclass(frozen=True)
class CorrectionDiff:
    doc_id: str
    added: int
    modified: int
    deleted: int
    items: tuple[CorrectionItem, ...]


def diff_corrections(base: AnnotationSet, refined: AnnotationSet) -> CorrectionDiff:
    """Span-level edit summary between two passes over one document.

    Spans of the same field type pair greedily by maximal character overlap,
    one-to-one. Identical offsets are no-ops, paired-but-moved spans are
    modifications, leftover base spans are deletions, leftover refined spans
    are additions. Grouping changes are invisible here by design.
    """
    if base.doc_id != refined.doc_id:
        raise DocMismatch(f"cannot diff {base.doc_id!r} against {refined.doc_id!r}")
    items: list[CorrectionItem] = []
    for ft in FIELD_ORDER:
        b_spans = [s for s in base.spans if s.field_type == ft]
        r_spans = [s for s in refined.spans if s.field_type == ft]
        candidates = []
        for bi, bs in enumerate(b_spans):
            for ri, rs in enumerate(r_spans):
                ov = bs.overlap(rs)
                if ov > 0:
                    candidates.append((-ov, bs.start, bs.end, rs.start, rs.end, bi, ri))
        candidates.sort()
        used_b: set[int] = set()
        used_r: set[int] = set()
        for _, _, _, _, _, bi, ri in candidates:
            if bi in used_b or ri in used_r:
                continue
            used_b.add(bi)
            used_r.add(ri)
            bs, rs = b_spans[bi], r_spans[ri]
            if (bs.start, bs.end) != (rs.start, rs.end):
                items.append(CorrectionItem(kind="modified", field_type=ft, base=bs, refined=rs))
        for bi, bs in enumerate(b_spans):
            if bi not in used_b:
                items.append(CorrectionItem(kind="deleted", field_type=ft, base=bs))
        for ri, rs in enumerate(r_spans):
            if ri not in used_r:
                items.append(CorrectionItem(kind="added", field_type=ft, refined=rs))
    added = sum(1 for i in items if i.kind == "added")
    modified = sum(1 for i in items if i.kind == "modified")
    deleted = sum(1 for i in items if i.kind == "deleted")
    return CorrectionDiff(
        doc_id=base.doc_id, added=added, modified=modified, deleted=deleted, items=tuple(items)
    )


def apply_corrections(base: AnnotationSet, diff: CorrectionDiff) -> set[FieldSpan]:
    """Replay a diff against the base inventory; returns the resulting span set."""
    spans = set(base.spans)
    for item in diff.items:
        if item.kind == "deleted":
            spans.discard(item.base)
        elif item.kind == "modified":
            spans.discard(item.base)
            spans.add(item.refined)
        elif item.kind == "added":
            spans.add(item.refined)
    return spans


def correction_diff_to_json(diff: CorrectionDiff) -> dict:
    def span_json(s: Optional[FieldSpan]):
        if s is None:
            return None
        return {"field_type": s.field_type.value, "start": s.start, "end": s.end, "text": s.text}

    return {
        "doc_id": diff.doc_id,
        "added": diff.added,
        "modified": diff.modified,
        "deleted": diff.deleted,
        "items": [
            {
                "kind": i.kind,
                "field_type": i.field_type.value,
                "base": span_json(i.base),
                "refined": span_json(i.refined),
            }
            for i in diff.items
        ],
    }


class RegressionRow(NamedTuple):
    doc_id: str
    rater_id: str
    seconds_active: float
    added: int
    modified: int
    deleted: int


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, tuple[float, float, float]]  # name -> (estimate, std error, z)
    n_obs: int


def regress_time(rows: Iterable[RegressionRow]) -> RegressionResult:
    """OLS of active minutes on correction counts with rater fixed effects.

    Predictors: intercept, modified, added, deleted, plus a dummy per rater
    beyond the first (sorted order). Raises DegenerateDesign when the design
    is rank deficient or there are fewer than p + 2 rows.
    """
    rows = list(rows)
    raters = sorted({r.rater_id for r in rows})
    dummy_raters = raters[1:]
    names = ["intercept", "modified", "added", "deleted"] + [f"rater:{r}" for r in dummy_raters]
    p = len(names)
    n = len(rows)
    if n < p + 2:
        raise DegenerateDesign(f"{n} rows cannot support {p} predictors")
    x = np.zeros((n, p))
    y = np.zeros(n)
    for i, row in enumerate(rows):
        x[i, 0] = 1.0
        x[i, 1] = row.modified
        x[i, 2] = row.added
        x[i, 3] = row.deleted
        for j, rater in enumerate(dummy_raters):
            if row.rater_id == rater:
                x[i, 4 + j] = 1.0
        y[i] = row.seconds_active / 60.0
    if np.linalg.matrix_rank(x) < p:
        raise DegenerateDesign("design matrix is rank deficient (collinear or constant predictors)")
    xtx_inv = np.linalg.inv(x.T @ x)
    beta = xtx_inv @ x.T @ y
    resid = y - x @ beta
    sigma2 = float(resid @ resid) / (n - p)
    se = np.sqrt(np.clip(np.diag(xtx_inv) * sigma2, 0.0, None))
    coefficients = {}
    for name, b, s in zip(names, beta, se):
        z = float(b / s) if s > 0 else 0.0
        coefficients[name] = (float(b), float(s), z)
    return RegressionResult(coefficients=coefficients, n_obs=n)


def regression_to_json(result: RegressionResult) -> dict:
    return {
        "n_obs": result.n_obs,
        "coefficients": {
            name: {"estimate": est, "std_error": se, "z": z}
            for name, (est, se, z) in result.coefficients.items()
        },
    }
