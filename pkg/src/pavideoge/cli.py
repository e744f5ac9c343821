"""Command-line entry point.

Warnings and errors go to stderr as ``level<TAB>stage<TAB>code<TAB>message``;
the exit status is non-zero iff a stage failed.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .corpus import ingest_corpus, load_site_profile
from .diagnostics import Diagnostics, DiagnosticsHandler
from .errors import PavideogeError
from .extractor import read_store, write_store
from .fileio import atomic_write_text
from .fusion import Searcher
from .index import load_index, save_index
from .pipeline import load_config, output_lock, print_result
from .synth import generate_synthetic_corpus, load_gen_spec
from .tuner import compare_methods, grid_search, load_groups, load_qrels, load_queries


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pavideoge", description="Metadata-driven video search pipeline.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    _common(p)
    p.add_argument("--spec", dest="gen_spec")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="corpus")

    p = sub.add_parser("ingest", help="ingest playpages and fixtures")
    _common(p)
    p.add_argument("--profile")
    p.add_argument("--corpus")
    p.add_argument("--out", dest="ingest_out")

    p = sub.add_parser("build", help="build pavideoge records")
    _common(p)
    p.add_argument("--profile")
    p.add_argument("--corpus")
    p.add_argument("--out", dest="store")
    p.add_argument("--transport", choices=["fixture", "http"])

    p = sub.add_parser("rank", help="compute videorank and rewrite the store")
    _common(p)
    p.add_argument("--store")
    p.add_argument("--corpus")
    p.add_argument("--profile")
    p.add_argument("--damping", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--dump-graph")

    p = sub.add_parser("index", help="build the language-model index")
    _common(p)
    p.add_argument("--store")
    p.add_argument("--out", dest="index")
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--tokenizer", choices=["cjk-bigram-mixed", "whitespace"])
    p.add_argument("--fields", choices=["all", "title-tags"], help="indexed text (default: all regions)")

    p = sub.add_parser("search", help="run one query")
    _common(p)
    p.add_argument("--index")
    p.add_argument("--store")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--query", required=True)
    p.add_argument("--format", choices=["table", "run"], default="table")
    p.add_argument("--query-id", default="q")

    for name, help_ in (("tune", "grid-search the effect factors"), ("eval", "compare against text-only ranking")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--index")
        p.add_argument("--store")
        p.add_argument("--queries", required=True)
        p.add_argument("--qrels", required=True)
        p.add_argument("--k", type=int)
        if name == "tune":
            p.add_argument("--grid-step", type=float, default=0.1)
            p.add_argument("--grid-max", type=float, default=0.8)
        else:
            p.add_argument("--groups", required=True)
            p.add_argument("--a", type=float)
            p.add_argument("--b", type=float)
            p.add_argument("--train-queries", help="grid-search (a, b) on these queries first")
            p.add_argument("--run-out", help="write the fused run file here")
            p.add_argument("--baseline-index", help="rank the baseline on this index instead (e.g. title-tags)")

    p = sub.add_parser("run", help="run pipeline stages in order")
    _common(p)
    p.add_argument("--stages", default=",".join(pipeline.STAGES))
    for flag, dest in (("--spec", "gen_spec"), ("--profile", "profile"), ("--corpus", "corpus"),
                       ("--store", "store"), ("--index", "index")):
        p.add_argument(flag, dest=dest)
    p.add_argument("--seed", type=int)
    return ap


_CONFIG_KEYS = {
    "profile", "corpus", "store", "index", "ingest_out", "gen_spec", "seed", "damping", "tol",
    "max_iter", "tokenizer", "fields", "lam", "a", "b", "k", "transport",
}


def _config(args: argparse.Namespace) -> pipeline.PipelineConfig:
    overrides = {k: v for k, v in vars(args).items() if k in _CONFIG_KEYS}
    return load_config(args.config, **overrides)


def _need(value, flag: str):
    if value is None:
        raise pipeline.StagePrereqMissing(f"missing {flag}")
    return value


def cmd_gen(cfg, args, diag):
    out = _need(cfg.corpus, "--out")
    spec = load_gen_spec(_need(cfg.gen_spec, "--spec"))
    generate_synthetic_corpus(spec, cfg.seed, out)
    print(f"wrote {spec.n} pages to {out}")


def cmd_ingest(cfg, args, diag):
    out = _need(cfg.ingest_out, "--out")
    profile = load_site_profile(_need(cfg.profile_path, "--profile"))
    bundle = ingest_corpus(_need(cfg.corpus, "--corpus"), profile, diag)
    with output_lock(out):
        pipeline.write_ingest_snapshot(bundle, out)
    print(f"ingested {len(bundle.playpages)} pages ({len(bundle.skipped)} skipped)")


def cmd_build(cfg, args, diag):
    out = _need(cfg.store, "--out")
    _need(cfg.corpus, "--corpus")
    records = pipeline.build_store(cfg, diag)
    with output_lock(out):
        write_store(out, records)
    print(f"built {len(records)} records")


def cmd_rank(cfg, args, diag):
    _need(cfg.store, "--store")
    records, graph, result = pipeline.rank_store(cfg, diag)
    with output_lock(cfg.store):
        write_store(cfg.store, records)
    if args.dump_graph:
        atomic_write_text(args.dump_graph, graph.dumps())
    print(f"videorank over {len(graph)} nodes, {sum(graph.out_degree)} edges, {result.iterations_run} iterations")


def cmd_index(cfg, args, diag):
    out = _need(cfg.index, "--out")
    index = pipeline.index_store(cfg)
    with output_lock(out):
        save_index(index, out)
    print(f"indexed {len(index.doc_ids)} documents, {len(index.vocabulary)} terms")


def _searcher(cfg) -> Searcher:
    index = load_index(_need(cfg.index, "--index"))
    return Searcher(index, read_store(_need(cfg.store, "--store")))


def cmd_search(cfg, args, diag):
    rows = _searcher(cfg).search(args.query, cfg.factors, cfg.k)
    sys.stdout.write(print_result(rows, args.format, args.query_id))


def cmd_tune(cfg, args, diag):
    searcher = _searcher(cfg)
    result = grid_search(load_queries(args.queries), load_qrels(args.qrels), searcher, args.grid_step, args.grid_max, cfg.k)
    sys.stdout.write(result.format_table())


def cmd_eval(cfg, args, diag):
    searcher = _searcher(cfg)
    queries, qrels = load_queries(args.queries), load_qrels(args.qrels)
    factors = cfg.factors
    if args.train_queries:
        tuned = grid_search(load_queries(args.train_queries), qrels, searcher, k=cfg.k)
        factors = pipeline.EffectFactors(*tuned.best)
        print(f"trained a={factors.a:.1f} b={factors.b:.1f} average_precision={tuned.best_precision:.4f}")
    baseline = None
    if args.baseline_index:
        baseline = Searcher(load_index(args.baseline_index), searcher.records)
    table = compare_methods(queries, qrels, searcher, load_groups(args.groups), factors, cfg.k, baseline)
    sys.stdout.write(table.format_table())
    if args.run_out:
        text = "".join(print_result(searcher.search(q, factors, cfg.k), "run", qid) for qid, q in queries.entries)
        atomic_write_text(args.run_out, text)


def cmd_run(cfg, args, diag):
    stages = [s.strip() for s in args.stages.split(",") if s.strip()]
    report = pipeline.run_pipeline(cfg, stages, diag)
    sys.stdout.write(report.format())


COMMANDS = {
    "gen": cmd_gen,
    "ingest": cmd_ingest,
    "build": cmd_build,
    "rank": cmd_rank,
    "index": cmd_index,
    "search": cmd_search,
    "tune": cmd_tune,
    "eval": cmd_eval,
    "run": cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    diag = Diagnostics(stage=args.command)
    root = logging.getLogger("pavideoge")
    handler = DiagnosticsHandler(diag)
    root.addHandler(handler)
    root.propagate = False
    status = 0
    try:
        cfg = _config(args)
        COMMANDS[args.command](cfg, args, diag)
    except PavideogeError as exc:
        stage = getattr(exc, "stage", args.command)
        if not any(d.level == "error" for d in diag.entries):
            diag.for_stage(stage).error(exc.code, str(exc))
        status = 2
    except (ValueError, OSError) as exc:
        diag.error(type(exc).__name__, str(exc))
        status = 2
    finally:
        root.removeHandler(handler)
        root.propagate = True
    diag.write(sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
