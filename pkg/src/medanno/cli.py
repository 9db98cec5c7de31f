"""Command-line entry point: medanno <command> ...

Exit codes: 0 success, 1 usage or configuration error, 2 run completed but
some documents failed and were skipped.
"""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import analysis, evalsuite, pipeline
from .chunker import DEFAULT_CHUNK_DIRECT, DEFAULT_CHUNK_IOB
from .io import atomic_write_text, export_corpus, import_gold_corpus
from .model import FormatError, MedannoError, OffsetError
from .prompting import SCHEMA_DIRECT, SCHEMA_IOB, BackendConfig
from .store import Store

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are exit code 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _read_subset(path):
    if path is None:
        return None
    ids = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            ids.add(line)
    return ids


def _backend_from_args(args) -> BackendConfig:
    if args.backend == "replay":
        if not args.fixtures:
            raise MedannoError("--backend replay needs --fixtures FILE")
        return BackendConfig(kind="replay", fixtures_path=args.fixtures)
    base_url = args.base_url or os.environ.get("MEDANNO_BACKEND_URL")
    if not base_url:
        raise MedannoError("--backend http needs --base-url or MEDANNO_BACKEND_URL")
    return BackendConfig(
        kind="http", base_url=base_url, auth_token=os.environ.get("MEDANNO_BACKEND_TOKEN")
    )


def _schemas_from_args(args) -> tuple:
    if args.schema == "iob":
        return (SCHEMA_IOB,)
    if args.schema == "direct":
        return (SCHEMA_DIRECT,)
    return (SCHEMA_IOB, SCHEMA_DIRECT)


def cmd_preprocess(args) -> int:
    docs, sets = import_gold_corpus(args.input, format=args.format)
    store = Store(args.store)
    store.put_documents(docs)
    store.put_many(sets)
    print(f"imported {len(docs)} documents, {len(sets)} gold annotation sets into {args.store}")
    return EXIT_OK


def cmd_annotate(args) -> int:
    chunk_sizes = {SCHEMA_IOB: DEFAULT_CHUNK_IOB, SCHEMA_DIRECT: DEFAULT_CHUNK_DIRECT}
    if args.chunk_size:
        for schema in _schemas_from_args(args):
            chunk_sizes[schema] = args.chunk_size
    cfg = pipeline.RunConfig(
        store_dir=Path(args.store),
        schemas=_schemas_from_args(args),
        chunk_sizes=chunk_sizes,
        model_id=args.model_id,
        temperature=args.temperature,
        max_decode_steps=args.max_steps,
        backend=_backend_from_args(args),
        ensemble=not args.no_ensemble,
        workers=args.workers,
        subset=_read_subset(args.subset),
    )
    summary = pipeline.run_annotate(cfg)
    for source in sorted(summary.emitted):
        stats = summary.emitted[source]
        print(f"{source}: {stats['docs']} docs, {stats['entries']} entries, {stats['spans']} spans")
    if summary.failures:
        for failure in summary.failures:
            print(f"FAILED {failure['doc_id']} ({failure['source']}): {failure['error']}")
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_ensemble(args) -> int:
    n = pipeline.ensemble_store(Path(args.store))
    print(f"ensembled {n} documents")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = pipeline.evaluate_store(
        Path(args.store),
        args.gold,
        args.pred,
        level=args.level,
        mode=args.mode,
        include_reason=args.include_reason,
        subset=_read_subset(args.subset),
    )
    if args.out:
        out = Path(args.out)
        if out.suffix == ".csv":
            atomic_write_text(out, evalsuite.report_to_csv(report))
        else:
            atomic_write_text(out, json.dumps(evalsuite.report_to_json(report), indent=2) + "\n")
        print(f"wrote {out}")
    else:
        print(evalsuite.report_to_csv(report), end="")
    c = report.overall
    fb = evalsuite.f_beta(c.precision, c.recall, args.beta)
    print(
        f"overall {report.level}/{report.mode}: P={c.precision:.3f} R={c.recall:.3f} "
        f"F1={c.f1:.3f} F{args.beta:g}={fb:.3f} over {report.doc_count} docs"
    )
    return EXIT_OK


def cmd_significance(args) -> int:
    store = Store(args.store)
    subset = _read_subset(args.subset)
    gold, a_sets, b_sets = [], [], []
    for doc_id in sorted(store.documents):
        if subset is not None and doc_id not in subset:
            continue
        g = store.get(doc_id, args.gold)
        a = store.get(doc_id, args.pred_a)
        b = store.get(doc_id, args.pred_b)
        if g is None or a is None or b is None:
            continue
        gold.append(g)
        a_sets.append(a)
        b_sets.append(b)
    if not gold:
        raise MedannoError("no documents hold all three requested sources")
    spec = analysis.MetricSpec(mode=args.mode, level=args.level, statistic=args.statistic)
    result = analysis.randomization_test(
        gold, a_sets, b_sets, spec=spec, n_resamples=args.n, seed=args.seed
    )
    payload = analysis.significance_to_json(result, spec)
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        atomic_write_text(Path(args.out), text)
        print(f"wrote {args.out}")
    print(
        f"delta={result.delta_observed:+.4f} p={result.p_value:.4f} "
        f"95th={result.percentile_95:.4f} (n={result.n_resamples}, seed={result.seed})"
    )
    return EXIT_OK


def cmd_diff(args) -> int:
    rows = pipeline.diff_store(Path(args.store), args.base, subset=_read_subset(args.subset))
    text = pipeline._diff_rows_to_csv(rows)
    if args.out:
        atomic_write_text(Path(args.out), text)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_regress(args) -> int:
    with open(args.input, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = [
            analysis.RegressionRow(
                doc_id=r["doc_id"],
                rater_id=r["rater_id"],
                seconds_active=float(r["seconds_active"]),
                added=int(r["added"]),
                modified=int(r["modified"]),
                deleted=int(r["deleted"]),
            )
            for r in reader
        ]
    result = analysis.regress_time(rows)
    payload = analysis.regression_to_json(result)
    if args.out:
        atomic_write_text(Path(args.out), json.dumps(payload, indent=2) + "\n")
        print(f"wrote {args.out}")
    print(f"n_obs={result.n_obs}")
    for name, (est, se, z) in result.coefficients.items():
        print(f"  {name:<16} {est:+.4f}  se={se:.4f}  z={z:+.2f}")
    return EXIT_OK


def cmd_report(args) -> int:
    result = pipeline.run_report(
        Path(args.store),
        Path(args.out),
        gold_source=args.gold,
        pred_sources=tuple(args.preds),
        include_reason=args.include_reason,
        n_resamples=args.n,
        seed=args.seed,
        diff_base=args.diff_base,
        subset=_read_subset(args.subset),
    )
    for name in result["written"]:
        print(f"wrote {Path(args.out) / name}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    serve(Path(args.store), port=args.port, host=args.host, ui_dir=args.ui_dir)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="medanno", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="import a gold corpus into a store")
    p.add_argument("--input", required=True, help="corpus file or directory")
    p.add_argument("--format", choices=("jsonl", "i2b2"), default="jsonl")
    p.add_argument("--store", required=True, help="store directory to create or update")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("annotate", help="run LLM annotation over the stored corpus")
    p.add_argument("--store", required=True)
    p.add_argument("--schema", choices=("iob", "direct", "both"), default="both")
    p.add_argument("--chunk-size", type=int, default=None)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-steps", type=int, default=1024)
    p.add_argument("--backend", choices=("replay", "http"), default="replay")
    p.add_argument("--fixtures", default=None, help="replay fixtures JSONL")
    p.add_argument("--base-url", default=None, help="http backend base URL")
    p.add_argument("--model-id", default="annotator-v1")
    p.add_argument("--no-ensemble", action="store_true")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--subset", default=None, help="file of doc ids, one per line")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("ensemble", help="combine stored llm-iob and llm-direct sets")
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="score one prediction source against gold")
    p.add_argument("--store", required=True)
    p.add_argument("--gold", default="gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--level", choices=evalsuite.LEVELS, default="phrase")
    p.add_argument("--mode", choices=evalsuite.MODES, default="vertical")
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--include-reason", action="store_true")
    p.add_argument("--subset", default=None)
    p.add_argument("--out", default=None, help=".csv or .json path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("significance", help="approximate randomization between two sources")
    p.add_argument("--store", required=True)
    p.add_argument("--gold", default="gold")
    p.add_argument("--pred-a", required=True)
    p.add_argument("--pred-b", required=True)
    p.add_argument("--level", choices=evalsuite.LEVELS, default="phrase")
    p.add_argument("--mode", choices=evalsuite.MODES, default="vertical")
    p.add_argument("--statistic", choices=analysis.STATISTICS, default="f1")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subset", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("diff", help="corrections CSV of refined sets against a base source")
    p.add_argument("--store", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--subset", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("regress", help="active-time regression from a corrections CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("report", help="full metric/significance/diff bundle")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gold", default="gold")
    p.add_argument("--preds", nargs="+", default=["llm-iob", "llm-direct", "llm-ensemble"])
    p.add_argument("--include-reason", action="store_true")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--diff-base", default=None)
    p.add_argument("--subset", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the refinement workbench API")
    p.add_argument("--store", required=True)
    p.add_argument("--port", type=int, default=8077)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui-dir", default=None, help="built UI directory to mount at /ui")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MedannoError, FormatError, OffsetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
