"""Batch orchestration: annotate a corpus with both prompt schemas, ensemble
the results, and produce evaluation reports."""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

from . import analysis, evalsuite
from .chunker import DEFAULT_CHUNK_DIRECT, DEFAULT_CHUNK_IOB, chunk_document
from .ensemble import ensemble_union
from .model import Document
from .prompting import (
    SCHEMA_DIRECT,
    SCHEMA_IOB,
    BackendConfig,
    BackendUnavailable,
    FixtureMiss,
    GenParams,
    Generator,
    PromptTemplate,
    build_prompt,
    load_template,
)
from .resolvers import ResolveLog, parse_direct_output, parse_iob_output, assemble_iob_entities, to_document_annotations
from .store import Store

log = logging.getLogger(__name__)

SCHEMA_SOURCES = {SCHEMA_IOB: "llm-iob", SCHEMA_DIRECT: "llm-direct"}

_TEMPLATE_DIR = Path(__file__).parent / "templates"
DEFAULT_TEMPLATES = {
    SCHEMA_IOB: _TEMPLATE_DIR / "iob_v1.txt",
    SCHEMA_DIRECT: _TEMPLATE_DIR / "direct_v1.txt",
}


@dataclass
class RunConfig:
    store_dir: Path
    schemas: tuple[str, ...] = (SCHEMA_IOB, SCHEMA_DIRECT)
    chunk_sizes: dict = dc_field(
        default_factory=lambda: {SCHEMA_IOB: DEFAULT_CHUNK_IOB, SCHEMA_DIRECT: DEFAULT_CHUNK_DIRECT}
    )
    templates: dict = dc_field(default_factory=lambda: dict(DEFAULT_TEMPLATES))
    model_id: str = "annotator-v1"
    temperature: float = 0.0
    max_decode_steps: int = 1024
    backend: BackendConfig = dc_field(default_factory=lambda: BackendConfig(kind="replay"))
    ensemble: bool = True
    workers: int = 4
    subset: Optional[set] = None


@dataclass
class RunSummary:
    documents: int
    emitted: dict  # source -> {"docs": n, "entries": n, "spans": n}
    failures: list  # [{"doc_id", "source", "error"}]
    log_counts: dict  # kind -> n

    @property
    def ok(self) -> bool:
        return not self.failures


def _select_documents(store: Store, subset: Optional[set]) -> list[Document]:
    docs = sorted(store.documents.values(), key=lambda d: d.doc_id)
    if subset is None:
        return docs
    known = {d.doc_id for d in docs}
    for missing in sorted(subset - known):
        log.warning("subset names unknown document %r; skipping it", missing)
    return [d for d in docs if d.doc_id in subset]


def _annotate_one(doc, schema, template: PromptTemplate, chunk_size, params, generator):
    source = SCHEMA_SOURCES[schema]
    rlog = ResolveLog()
    per_chunk = []
    for chunk in chunk_document(doc, chunk_size):
        prompt = build_prompt(template, chunk)
        completion = generator.generate(prompt, params)
        if schema == SCHEMA_IOB:
            tags, clog = parse_iob_output(completion.text)
            entities = assemble_iob_entities(tags, clog)
        else:
            entities, clog = parse_direct_output(completion.text)
        rlog.extend(clog, chunk_base=chunk.base)
        per_chunk.append((chunk, entities))
    meta = {
        "schema": schema,
        "template_version": template.version,
        "model_id": params.model_id,
        "temperature": params.temperature,
        "max_decode_steps": params.max_decode_steps,
        "chunk_size": chunk_size,
    }
    aset = to_document_annotations(per_chunk, doc, source, rlog=rlog, meta=meta)
    return aset, rlog


def run_annotate(cfg: RunConfig) -> RunSummary:
    """Annotate every stored document with each configured schema.

    A backend failure skips that document for that schema and is recorded in
    the summary; every other document still gets written. Output files are
    deterministic for a fixed corpus, templates, and fixture set.
    """
    store = Store(cfg.store_dir)
    docs = _select_documents(store, cfg.subset)
    templates = {schema: load_template(cfg.templates[schema]) for schema in cfg.schemas}
    params = GenParams(
        model_id=cfg.model_id, temperature=cfg.temperature, max_decode_steps=cfg.max_decode_steps
    )
    generator = Generator(cfg.backend)

    results: dict[tuple[str, str], object] = {}
    logs: dict[str, dict[str, ResolveLog]] = {SCHEMA_SOURCES[s]: {} for s in cfg.schemas}
    failures: list[dict] = []

    def work(doc: Document, schema: str):
        return _annotate_one(
            doc, schema, templates[schema], cfg.chunk_sizes[schema], params, generator
        )

    jobs = [(doc, schema) for doc in docs for schema in cfg.schemas]
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        futures = {pool.submit(work, doc, schema): (doc, schema) for doc, schema in jobs}
        for future, (doc, schema) in futures.items():
            source = SCHEMA_SOURCES[schema]
            try:
                aset, rlog = future.result()
            except (BackendUnavailable, FixtureMiss) as exc:
                failures.append({"doc_id": doc.doc_id, "source": source, "error": str(exc)})
                continue
            results[(doc.doc_id, source)] = aset
            logs[source][doc.doc_id] = rlog

    out_sets = [results[key] for key in sorted(results)]
    if cfg.ensemble and len(cfg.schemas) == 2:
        for doc in docs:
            a = results.get((doc.doc_id, "llm-iob"))
            b = results.get((doc.doc_id, "llm-direct"))
            if a is not None and b is not None:
                out_sets.append(ensemble_union(a, b))

    store.put_many(out_sets)
    log_counts: dict[str, int] = {}
    for source, per_doc in logs.items():
        lines = []
        for doc_id in sorted(per_doc):
            lines.extend(per_doc[doc_id].to_jsonl_lines(doc_id))
            for entry in per_doc[doc_id].entries:
                log_counts[entry.kind] = log_counts.get(entry.kind, 0) + 1
        store.write_resolve_log(source, lines)

    emitted: dict[str, dict] = {}
    for aset in out_sets:
        bucket = emitted.setdefault(aset.source, {"docs": 0, "entries": 0, "spans": 0})
        bucket["docs"] += 1
        bucket["entries"] += len(aset.entries)
        bucket["spans"] += len(aset.spans)
    summary = RunSummary(
        documents=len(docs), emitted=emitted, failures=sorted(failures, key=lambda f: (f["doc_id"], f["source"])), log_counts=log_counts
    )
    _write_summary(cfg.store_dir, summary)
    return summary


def _write_summary(store_dir: Path, summary: RunSummary) -> None:
    from .io import atomic_write_text

    payload = {
        "documents": summary.documents,
        "emitted": summary.emitted,
        "failures": summary.failures,
        "log_counts": dict(sorted(summary.log_counts.items())),
    }
    atomic_write_text(
        Path(store_dir) / "run_summary.json", json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )


def ensemble_store(store_dir: Path) -> int:
    """Combine llm-iob and llm-direct sets for every document holding both."""
    store = Store(store_dir)
    combined = []
    for doc_id in sorted(store.documents):
        a = store.get(doc_id, "llm-iob")
        b = store.get(doc_id, "llm-direct")
        if a is not None and b is not None:
            combined.append(ensemble_union(a, b))
    store.put_many(combined)
    return len(combined)


def evaluate_store(
    store_dir: Path,
    gold_source: str,
    pred_source: str,
    level: str = "phrase",
    mode: str = "vertical",
    include_reason: bool = False,
    subset: Optional[set] = None,
):
    """Aggregate metrics for one (gold, pred) source pair across the store."""
    store = Store(store_dir)
    reports = []
    compute = evalsuite.compute_vertical if mode == "vertical" else evalsuite.compute_horizontal
    for doc_id in sorted(store.documents):
        if subset is not None and doc_id not in subset:
            continue
        gold = store.get(doc_id, gold_source)
        pred = store.get(doc_id, pred_source)
        if gold is None or pred is None:
            continue
        reports.append(compute(gold, pred, level=level, include_reason=include_reason))
    return evalsuite.aggregate(reports, level=level, mode=mode)


def diff_store(store_dir: Path, base_source: str, subset: Optional[set] = None) -> list[dict]:
    """Per-document correction rows comparing refined sets against a base."""
    store = Store(store_dir)
    rows = []
    for doc_id in sorted(store.documents):
        if subset is not None and doc_id not in subset:
            continue
        base = store.get(doc_id, base_source)
        refined = store.get(doc_id, "refined")
        if base is None or refined is None:
            continue
        diff = analysis.diff_corrections(base, refined)
        rows.append(
            {
                "doc_id": doc_id,
                "rater_id": str(refined.meta.get("rater_id", "")),
                "seconds_active": refined.timing.seconds_active if refined.timing else 0.0,
                "added": diff.added,
                "modified": diff.modified,
                "deleted": diff.deleted,
            }
        )
    return rows


def run_report(
    store_dir: Path,
    out_dir: Path,
    gold_source: str = "gold",
    pred_sources: tuple[str, ...] = ("llm-iob", "llm-direct", "llm-ensemble"),
    include_reason: bool = False,
    n_resamples: int = 1000,
    seed: int = 0,
    diff_base: Optional[str] = None,
    subset: Optional[set] = None,
) -> dict:
    """Full report bundle: metrics at every level/mode for each prediction
    source, pairwise significance on phrase-level vertical F1, and (when a
    diff base is given) the corrections CSV plus the time regression."""
    from .io import atomic_write_text

    store = Store(store_dir)
    out_dir = Path(out_dir)
    written: list[str] = []

    available = {s for (_, s) in store.annotations}
    preds = [p for p in pred_sources if p in available]
    for missing in sorted(set(pred_sources) - set(preds)):
        log.warning("no annotations stored for source %r; skipping it", missing)

    for pred in preds:
        for level in evalsuite.LEVELS:
            for mode in evalsuite.MODES:
                report = evaluate_store(
                    store_dir, gold_source, pred, level=level, mode=mode,
                    include_reason=include_reason, subset=subset,
                )
                stem = f"metrics-{pred}-{level}-{mode}"
                atomic_write_text(out_dir / f"{stem}.csv", evalsuite.report_to_csv(report))
                atomic_write_text(
                    out_dir / f"{stem}.json",
                    json.dumps(evalsuite.report_to_json(report), indent=2) + "\n",
                )
                written.extend([f"{stem}.csv", f"{stem}.json"])

    gold_sets, sets_by_source = _collect_sets(store, gold_source, preds, subset)
    for i in range(len(preds)):
        for j in range(i + 1, len(preds)):
            a, b = preds[i], preds[j]
            docs = sorted(
                {s.doc_id for s in gold_sets}
                & {s.doc_id for s in sets_by_source[a]}
                & {s.doc_id for s in sets_by_source[b]}
            )
            if not docs:
                continue
            spec = analysis.MetricSpec(mode="vertical", level="phrase", statistic="f1")
            result = analysis.randomization_test(
                [s for s in gold_sets if s.doc_id in docs],
                [s for s in sets_by_source[a] if s.doc_id in docs],
                [s for s in sets_by_source[b] if s.doc_id in docs],
                spec=spec,
                n_resamples=n_resamples,
                seed=seed,
            )
            name = f"significance-{a}-vs-{b}.json"
            atomic_write_text(
                out_dir / name,
                json.dumps(analysis.significance_to_json(result, spec), indent=2) + "\n",
            )
            written.append(name)

    if diff_base is not None:
        rows = diff_store(store_dir, diff_base, subset=subset)
        csv_text = _diff_rows_to_csv(rows)
        atomic_write_text(out_dir / "corrections.csv", csv_text)
        written.append("corrections.csv")
        if rows:
            reg_rows = [
                analysis.RegressionRow(
                    doc_id=r["doc_id"],
                    rater_id=r["rater_id"],
                    seconds_active=float(r["seconds_active"]),
                    added=int(r["added"]),
                    modified=int(r["modified"]),
                    deleted=int(r["deleted"]),
                )
                for r in rows
            ]
            try:
                reg = analysis.regress_time(reg_rows)
                atomic_write_text(
                    out_dir / "time_regression.json",
                    json.dumps(analysis.regression_to_json(reg), indent=2) + "\n",
                )
                written.append("time_regression.json")
            except analysis.DegenerateDesign as exc:
                log.warning("time regression skipped: %s", exc)
    return {"written": written}


def _collect_sets(store: Store, gold_source: str, preds, subset):
    gold_sets = []
    sets_by_source: dict[str, list] = {p: [] for p in preds}
    for doc_id in sorted(store.documents):
        if subset is not None and doc_id not in subset:
            continue
        gold = store.get(doc_id, gold_source)
        if gold is None:
            continue
        gold_sets.append(gold)
        for p in preds:
            pred = store.get(doc_id, p)
            if pred is not None:
                sets_by_source[p].append(pred)
    # significance needs identical doc cover; trim to the intersection later
    return gold_sets, sets_by_source


DIFF_CSV_COLUMNS = ("doc_id", "rater_id", "seconds_active", "added", "modified", "deleted")


def _diff_rows_to_csv(rows: list[dict]) -> str:
    import csv as _csv
    import io as _io

    buf = _io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(DIFF_CSV_COLUMNS)
    for r in rows:
        writer.writerow([r[c] for c in DIFF_CSV_COLUMNS])
    return buf.getvalue()
