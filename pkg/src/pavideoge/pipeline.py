"""Staged pipeline: gen -> ingest -> build -> rank -> index.

Every stage reads its inputs from disk and writes one artifact atomically,
so stages can run separately from the CLI or together via run_pipeline.
"""

from __future__ import annotations

import contextlib
import json
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import filelock

from .corpus import CorpusBundle, SiteProfile, ingest_corpus, load_site_profile
from .diagnostics import Diagnostics
from .errors import BadDamping, InconsistentStores, LockHeld, PavideogeError, StagePrereqMissing
from .extractor import FixtureTransport, HttpTransport, PavideogeRecord, build_records, read_store, write_store
from .fileio import atomic_write_text
from .fusion import EffectFactors, ScoreBreakdown
from .graph import LinkGraph, VideorankResult, build_link_graph, compute_videorank
from .index import INDEX_FIELDS, LmIndex, TokenizerConfig, build_index, save_index
from .synth import generate_synthetic_corpus, load_gen_spec

STAGES = ("gen", "ingest", "build", "rank", "index")


@dataclass(frozen=True)
class PipelineConfig:
    profile: str | None = None
    corpus: str | None = None
    store: str | None = None
    index: str | None = None
    ingest_out: str | None = None
    gen_spec: str | None = None
    seed: int = 0
    damping: float = 0.85
    tol: float = 1e-8
    max_iter: int = 200
    tokenizer: str = "cjk-bigram-mixed"
    fields: str = "all"
    lam: float = 0.5
    a: float = 0.1
    b: float = 0.4
    k: int = 10
    transport: str = "fixture"

    def __post_init__(self) -> None:
        # re-run each owner's validation
        EffectFactors(self.a, self.b)
        TokenizerConfig(self.tokenizer)
        if self.fields not in INDEX_FIELDS:
            raise ValueError(f"fields must be one of {INDEX_FIELDS}, got {self.fields!r}")
        if not 0.0 < self.damping < 1.0:
            raise BadDamping(f"damping must lie in (0, 1), got {self.damping}")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        if self.k < 1 or self.tol <= 0 or self.max_iter < 1:
            raise ValueError("k and max_iter must be >= 1, tol > 0")
        if self.transport not in ("fixture", "http"):
            raise ValueError(f"transport must be fixture or http, got {self.transport!r}")

    @property
    def profile_path(self) -> Path | None:
        if self.profile:
            return Path(self.profile)
        if self.corpus and (Path(self.corpus) / "site.profile").exists():
            return Path(self.corpus) / "site.profile"
        return None

    @property
    def ingest_path(self) -> Path | None:
        if self.ingest_out:
            return Path(self.ingest_out)
        return Path(self.store + ".pages.jsonl") if self.store else None

    @property
    def factors(self) -> EffectFactors:
        return EffectFactors(self.a, self.b)


_ALIASES = {"lambda": "lam", "spec": "gen_spec", "tolerance": "tol", "d": "damping"}


def parse_config(text: str) -> dict[str, object]:
    """key=value lines -> typed overrides for PipelineConfig."""
    types = {f.name: f.type for f in fields(PipelineConfig)}
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        key = _ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if not sep or key not in types:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        t = types[key]
        out[key] = int(value) if t == "int" else float(value) if t == "float" else value
    return out


def load_config(path: str | os.PathLike | None = None, **overrides) -> PipelineConfig:
    """Defaults < config file < explicit overrides (None values are ignored)."""
    values: dict[str, object] = {}
    if path is not None:
        values.update(parse_config(Path(path).read_text(encoding="utf-8")))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


@contextlib.contextmanager
def output_lock(path: str | os.PathLike):
    """Refuse to run while another invocation writes the same artifact."""
    lock = filelock.FileLock(str(path) + ".lock", timeout=0)
    try:
        lock.acquire()
    except filelock.Timeout:
        raise LockHeld(f"{path} is locked by another process") from None
    try:
        yield
    finally:
        lock.release()
        with contextlib.suppress(OSError):
            os.unlink(str(path) + ".lock")


def _require(path: Path | None, what: str, stage: str) -> Path:
    if path is None or not path.exists():
        raise StagePrereqMissing(f"{stage}: missing {what} ({path})")
    return path


def _profile(config: PipelineConfig, stage: str) -> SiteProfile:
    return load_site_profile(_require(config.profile_path, "site profile", stage))


def _bundle(config: PipelineConfig, stage: str, diag: Diagnostics | None = None) -> CorpusBundle:
    corpus = _require(Path(config.corpus) if config.corpus else None, "corpus directory", stage)
    return ingest_corpus(corpus, _profile(config, stage), diag)


def _transport(config: PipelineConfig, bundle: CorpusBundle):
    if config.transport == "http":
        return HttpTransport()
    return FixtureTransport(bundle.fixture_store)


# -- stages -----------------------------------------------------------------


def write_ingest_snapshot(bundle: CorpusBundle, path: str | os.PathLike) -> None:
    lines = [
        json.dumps(
            {"doc_id": p.doc_id, "url": p.url, "fetched_links": list(p.fetched_links), "raw_html": p.raw_html},
            ensure_ascii=False,
        )
        for p in bundle.playpages
    ]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def stage_gen(config: PipelineConfig, diag: Diagnostics) -> dict:
    spec_path = _require(Path(config.gen_spec) if config.gen_spec else None, "generation spec", "gen")
    if not config.corpus:
        raise StagePrereqMissing("gen: no corpus output directory")
    spec = load_gen_spec(spec_path)
    generate_synthetic_corpus(spec, config.seed, config.corpus)
    return {"pages": spec.n}


def stage_ingest(config: PipelineConfig, diag: Diagnostics) -> dict:
    bundle = _bundle(config, "ingest", diag)
    out = config.ingest_path
    if out is None:
        raise StagePrereqMissing("ingest: no output path")
    write_ingest_snapshot(bundle, out)
    return {"pages": len(bundle.playpages), "skipped": len(bundle.skipped), "fixtures": len(bundle.fixture_store)}


def build_store(config: PipelineConfig, diag: Diagnostics | None = None) -> list[PavideogeRecord]:
    bundle = _bundle(config, "build", diag)
    return build_records(bundle.playpages, bundle.profile, _transport(config, bundle), diag)


def stage_build(config: PipelineConfig, diag: Diagnostics) -> dict:
    _require(config.ingest_path, "ingest artifact", "build")
    if not config.store:
        raise StagePrereqMissing("build: no store output path")
    records = build_store(config, diag)
    write_store(config.store, records)
    return {
        "records": len(records),
        "with_real_link": sum(r.real_link is not None for r in records),
        "with_playnum": sum(r.playnum > 0 for r in records),
    }


def apply_videorank(records: Sequence[PavideogeRecord], result: VideorankResult) -> list[PavideogeRecord]:
    scores = result.as_dict()
    return [replace(r, videorank=scores[r.doc_id]) for r in records]


def rank_store(
    config: PipelineConfig, diag: Diagnostics | None = None
) -> tuple[list[PavideogeRecord], LinkGraph, VideorankResult]:
    records = read_store(_require(Path(config.store) if config.store else None, "pavideoge store", "rank"))
    bundle = _bundle(config, "rank", diag)
    graph = build_link_graph(bundle)
    if set(graph.nodes) != {r.doc_id for r in records}:
        raise InconsistentStores("store and corpus cover different documents")
    result = compute_videorank(graph, config.damping, config.tol, config.max_iter)
    if not result.converged and diag is not None:
        diag.warn("NotConverged", f"residual {result.final_residual:.3g} after {result.iterations_run} iterations")
    if graph.dropped_out_of_corpus and diag is not None:
        diag.warn("OutOfCorpusLinks", f"{graph.dropped_out_of_corpus} playpage links point outside the corpus")
    return apply_videorank(records, result), graph, result


def stage_rank(config: PipelineConfig, diag: Diagnostics) -> dict:
    _require(config.ingest_path, "ingest artifact", "rank")
    records, graph, result = rank_store(config, diag)
    write_store(config.store, records)
    return {"nodes": len(graph), "edges": sum(graph.out_degree), "iterations": result.iterations_run}


def index_store(config: PipelineConfig) -> LmIndex:
    records = read_store(_require(Path(config.store) if config.store else None, "pavideoge store", "index"))
    return build_index(records, TokenizerConfig(config.tokenizer), config.lam, config.fields)


def stage_index(config: PipelineConfig, diag: Diagnostics) -> dict:
    if not config.index:
        raise StagePrereqMissing("index: no index output path")
    index = index_store(config)
    if index.empty_docs:
        diag.warn("EmptyDocuments", f"{len(index.empty_docs)} documents have no text")
    save_index(index, config.index)
    return {"docs": len(index.doc_ids), "vocabulary": len(index.vocabulary), "tokens": index.collection_length}


_STAGE_FUNCS = {
    "gen": stage_gen,
    "ingest": stage_ingest,
    "build": stage_build,
    "rank": stage_rank,
    "index": stage_index,
}


@dataclass
class StageReport:
    stage: str
    counts: dict
    warnings: int
    seconds: float


@dataclass
class PipelineReport:
    stages: list[StageReport] = field(default_factory=list)
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def format(self) -> str:
        lines = []
        for s in self.stages:
            counts = " ".join(f"{k}={v}" for k, v in s.counts.items())
            lines.append(f"{s.stage}\t{counts}\twarnings={s.warnings}\t{s.seconds:.3f}s")
        return "\n".join(lines) + "\n"


def _stage_output(config: PipelineConfig, stage: str) -> str | None:
    return {
        "gen": config.corpus,
        "ingest": str(config.ingest_path) if config.ingest_path else None,
        "build": config.store,
        "rank": config.store,
        "index": config.index,
    }[stage]


def run_stage(config: PipelineConfig, stage: str, diag: Diagnostics) -> StageReport:
    sd = diag.for_stage(stage)
    before = len(diag.entries)
    start = time.perf_counter()
    out = _stage_output(config, stage)
    try:
        if out:
            Path(out).parent.mkdir(parents=True, exist_ok=True)
            with output_lock(out):
                counts = _STAGE_FUNCS[stage](config, sd)
        else:
            counts = _STAGE_FUNCS[stage](config, sd)
    except PavideogeError as exc:
        sd.error(exc.code, str(exc))
        exc.stage = stage
        raise
    return StageReport(stage, counts, len(diag.entries) - before, time.perf_counter() - start)


def run_pipeline(
    config: PipelineConfig, stages: Iterable[str] = STAGES, diag: Diagnostics | None = None
) -> PipelineReport:
    """Run the requested stages in dependency order."""
    wanted = set(stages)
    unknown = wanted - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages: {sorted(unknown)}")
    report = PipelineReport(diagnostics=diag if diag is not None else Diagnostics())
    for stage in STAGES:
        if stage in wanted:
            report.stages.append(run_stage(config, stage, report.diagnostics))
    return report


# -- result output ----------------------------------------------------------

TABLE_HEADER = "rank\tdoc_id\tM\tL_norm\tP_norm\tVR_norm\treal_link\tplaypage_url"


def print_result(
    breakdowns: Sequence[ScoreBreakdown], format: str = "table", query_id: str = "q", tag: str = "pavideoge"
) -> str:
    if format == "table":
        lines = [TABLE_HEADER]
        for rank, b in enumerate(breakdowns, 1):
            lines.append(
                f"{rank}\t{b.doc_id}\t{b.m:.6f}\t{b.l_norm:.6f}\t{b.p_norm:.6f}\t{b.vr_norm:.6f}"
                f"\t{b.real_link or '-'}\t{b.playpage_url or '-'}"
            )
        return "\n".join(lines) + "\n"
    if format == "run":
        return "".join(f"{query_id} Q0 {b.doc_id} {rank} {b.m:.10f} {tag}\n" for rank, b in enumerate(breakdowns, 1))
    raise ValueError(f"unknown format {format!r}")
