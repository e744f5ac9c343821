"""Precision evaluation and effect-factor training."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import BadInputFile, EmptyGrid, EmptyGroup, NoQueries
from .fusion import EffectFactors

logger = logging.getLogger(__name__)

MIN_TRAINING_QUERIES = 50


class RankingSystem(Protocol):
    def ranking(self, query: str, factors: EffectFactors | None, k: int = 10) -> list[str]: ...


@dataclass(frozen=True)
class QuerySet:
    entries: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        ids = [q for q, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise BadInputFile("duplicate query ids")

    def __len__(self) -> int:
        return len(self.entries)

    def subset(self, ids: Iterable[str]) -> "QuerySet":
        wanted = set(ids)
        return QuerySet(tuple(e for e in self.entries if e[0] in wanted))


@dataclass(frozen=True)
class Qrels:
    judgments: Mapping[tuple[str, str], int] = field(default_factory=dict)

    def relevant(self, query_id: str, doc_id: str) -> bool:
        # unjudged pairs count as non-relevant
        return self.judgments.get((query_id, doc_id), 0) == 1


def _tsv_rows(path: str | os.PathLike, ncols: int) -> list[list[str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != ncols:
                raise BadInputFile(f"{path}:{lineno}: expected {ncols} tab-separated columns")
            rows.append(cols)
    return rows


def load_queries(path: str | os.PathLike) -> QuerySet:
    return QuerySet(tuple((q, text) for q, text in _tsv_rows(path, 2)))


def load_qrels(path: str | os.PathLike) -> Qrels:
    judgments = {}
    for q, d, rel in _tsv_rows(path, 3):
        if rel not in ("0", "1"):
            raise BadInputFile(f"{path}: relevance must be 0 or 1, got {rel!r}")
        judgments[(q, d)] = int(rel)
    return Qrels(judgments)


def load_groups(path: str | os.PathLike) -> dict[str, list[str]]:
    """``query_id<TAB>group`` lines -> group -> query ids (file order)."""
    groups: dict[str, list[str]] = {}
    for q, g in _tsv_rows(path, 2):
        groups.setdefault(g, []).append(q)
    return groups


def precision(ranked: Sequence[str], qrels: Qrels, query_id: str, k: int = 10) -> float:
    """Fraction of the top min(k, len(ranked)) results judged relevant."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(set(ranked)) != len(ranked):
        raise ValueError("ranked list contains duplicates")
    top = ranked[:k]
    if not top:
        return 0.0
    return sum(qrels.relevant(query_id, d) for d in top) / len(top)


def per_query_precision(
    queries: QuerySet, system: RankingSystem, qrels: Qrels, k: int, factors: EffectFactors | None
) -> dict[str, float]:
    return {qid: precision(system.ranking(text, factors, k), qrels, qid, k) for qid, text in queries.entries}


def average_precision_over_queries(
    queries: QuerySet,
    system: RankingSystem,
    qrels: Qrels,
    k: int = 10,
    factors: EffectFactors | None = None,
) -> float:
    """Unweighted mean precision@k; ``factors=None`` ranks by text alone."""
    if not len(queries):
        raise NoQueries("query set is empty")
    values = per_query_precision(queries, system, qrels, k, factors)
    return sum(values.values()) / len(values)


def grid_pairs(step: float = 0.1, grid_max: float = 0.8) -> list[tuple[float, float]]:
    """All (a, b) on the step lattice in (0, grid_max] with a + b < 1."""
    if step <= 0:
        raise EmptyGrid("grid step must be positive")
    top = int(round(grid_max / step))
    # lattice sums avoid 0.3 + 0.7 landing just below 1.0
    pairs = [
        (round(i * step, 10), round(j * step, 10))
        for i in range(1, top + 1)
        for j in range(1, top + 1)
        if (i + j) * step < 1.0 - 1e-9
    ]
    if not pairs:
        raise EmptyGrid(f"no valid pairs for step={step}, grid_max={grid_max}")
    return pairs


@dataclass(frozen=True)
class GridResult:
    rows: tuple[tuple[float, float, float], ...]
    best: tuple[float, float]
    best_precision: float

    @classmethod
    def from_rows(cls, rows: Sequence[tuple[float, float, float]]) -> "GridResult":
        if not rows:
            raise EmptyGrid("no rows")
        # ties: smaller a, then smaller b
        a, b, p = min(rows, key=lambda r: (-r[2], r[0], r[1]))
        return cls(tuple(rows), (a, b), p)

    def format_table(self) -> str:
        lines = ["a\tb\taverage_precision"]
        lines += [f"{a:.1f}\t{b:.1f}\t{p:.4f}" for a, b, p in self.rows]
        lines.append(f"best\ta={self.best[0]:.1f}\tb={self.best[1]:.1f}\taverage_precision={self.best_precision:.4f}")
        return "\n".join(lines) + "\n"


def grid_search(
    queries: QuerySet,
    qrels: Qrels,
    system: RankingSystem,
    grid_step: float = 0.1,
    grid_max: float = 0.8,
    k: int = 10,
) -> GridResult:
    if len(queries) < MIN_TRAINING_QUERIES:
        logger.warning("FewQueries: training with %d queries (< %d)", len(queries), MIN_TRAINING_QUERIES)
    rows = []
    for a, b in grid_pairs(grid_step, grid_max):
        ap = average_precision_over_queries(queries, system, qrels, k, EffectFactors(a, b))
        rows.append((a, b, ap))
    return GridResult.from_rows(rows)


def improvement_pct(fused: float, baseline: float) -> float:
    if baseline == 0:
        return 0.0 if fused == 0 else float("inf")
    return (fused - baseline) / baseline * 100.0


@dataclass(frozen=True)
class GroupComparison:
    group: str
    fused: float
    baseline: float

    @property
    def improvement(self) -> float:
        return improvement_pct(self.fused, self.baseline)


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[GroupComparison, ...]
    factors: EffectFactors

    @property
    def mean_improvement(self) -> float:
        return sum(r.improvement for r in self.rows) / len(self.rows)

    @property
    def mean_fused(self) -> float:
        return sum(r.fused for r in self.rows) / len(self.rows)

    @property
    def mean_baseline(self) -> float:
        return sum(r.baseline for r in self.rows) / len(self.rows)

    def format_table(self) -> str:
        lines = ["group\tuse_pavideoge\tno_use_pavideoge\timprovement_pct"]
        lines += [f"{r.group}\t{r.fused:.4f}\t{r.baseline:.4f}\t{r.improvement:.3f}%" for r in self.rows]
        lines.append(f"mean\t{self.mean_fused:.4f}\t{self.mean_baseline:.4f}\t{self.mean_improvement:.3f}%")
        return "\n".join(lines) + "\n"


def compare_methods(
    queries: QuerySet,
    qrels: Qrels,
    system: RankingSystem,
    groups: Mapping[str, Sequence[str]],
    factors: EffectFactors,
    k: int = 10,
    baseline: RankingSystem | None = None,
) -> ComparisonTable:
    """Per-group precision of the fused ranking against text-only ranking.

    The baseline ranks text-only, through ``baseline`` if given (e.g. a
    title+tag index) and otherwise through ``system`` itself.
    """
    known = {q for q, _ in queries.entries}
    seen: set[str] = set()
    rows = []
    for name in sorted(groups, key=_group_key):
        ids = list(groups[name])
        if not ids:
            raise EmptyGroup(f"group {name!r} is empty")
        missing = set(ids) - known
        if missing:
            raise BadInputFile(f"group {name!r} names unknown queries: {sorted(missing)[:3]}")
        if seen & set(ids):
            raise BadInputFile(f"group {name!r} overlaps another group")
        seen |= set(ids)
        sub = queries.subset(ids)
        fused = average_precision_over_queries(sub, system, qrels, k, factors)
        base = average_precision_over_queries(sub, baseline or system, qrels, k, None)
        rows.append(GroupComparison(name, fused, base))
    if not rows:
        raise EmptyGroup("no groups")
    return ComparisonTable(tuple(rows), factors)


def _group_key(name: str):
    return (0, int(name), name) if name.isdigit() else (1, 0, name)
