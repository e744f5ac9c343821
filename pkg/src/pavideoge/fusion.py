"""Score fusion: text relevance, playnum share and videorank.

Each component is min-max normalized over all documents before mixing

    M = (1 - a - b) * L + a * P + b * VR,   a > 0, b > 0, a + b < 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import BadFactors, EmptyCollection, InconsistentStores
from .extractor import PavideogeRecord
from .index import LmIndex, rank_rows, score_all

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EffectFactors:
    a: float = 0.1
    b: float = 0.4

    def __post_init__(self) -> None:
        if not (self.a > 0 and self.b > 0 and self.a + self.b < 1):
            raise BadFactors(f"need a > 0, b > 0, a + b < 1; got a={self.a}, b={self.b}")

    @property
    def text_weight(self) -> float:
        return 1.0 - self.a - self.b


@dataclass(frozen=True)
class ScoreBreakdown:
    doc_id: str
    l_norm: float
    p_norm: float
    vr_norm: float
    m: float
    real_link: str | None
    playpage_url: str = ""


def playnum_proportion(records: Sequence[PavideogeRecord]) -> dict[str, float]:
    """Each video's share of the total playnum; all zero if nobody played anything."""
    if not records:
        raise EmptyCollection("no records")
    total = sum(r.playnum for r in records)
    if total == 0:
        logger.warning("ZeroPlaynum: total playnum is 0; all proportions set to 0")
        return {r.doc_id: 0.0 for r in records}
    return {r.doc_id: r.playnum / total for r in records}


def _minmax(x: np.ndarray) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return np.ones_like(x, dtype=np.float64)
    # clip guards the last ulp; order is preserved either way
    return np.clip((x - lo) / (hi - lo), 0.0, 1.0)


def normalize_scores(raw: Mapping[str, float], method: str = "minmax") -> dict[str, float]:
    """Min-max rescale to [0, 1]. A constant map becomes all 1.0."""
    if method != "minmax":
        raise ValueError(f"unsupported normalization {method!r}")
    if not raw:
        return {}
    keys = list(raw)
    vals = np.asarray([raw[k] for k in keys], dtype=np.float64)
    if vals.max() == vals.min():
        logger.info("ConstantScores: %d values normalized to 1.0", len(keys))
    return dict(zip(keys, _minmax(vals).tolist()))


def modified_score(l_norm: float, p_norm: float, vr_norm: float, f: EffectFactors) -> float:
    for name, v in (("L", l_norm), ("P", p_norm), ("VR", vr_norm)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} component {v} outside [0, 1]")
    return f.text_weight * l_norm + f.a * p_norm + f.b * vr_norm


class Searcher:
    """Holds the query-independent components for repeated searches.

    Text scores are cached per query string, so sweeping many factor pairs
    over the same queries only re-mixes the normalized components.
    """

    def __init__(
        self,
        index: LmIndex,
        records: Sequence[PavideogeRecord],
        videorank: Mapping[str, float] | None = None,
    ):
        by_id = {r.doc_id: r for r in records}
        if set(by_id) != set(index.doc_ids) or len(by_id) != len(records):
            raise InconsistentStores("index and store cover different documents")
        vr = videorank if videorank is not None else {r.doc_id: r.videorank for r in records}
        if set(vr) != set(by_id):
            raise InconsistentStores("videorank covers different documents")
        self.index = index
        self.doc_ids = index.doc_ids
        self.records = [by_id[d] for d in self.doc_ids]
        share = playnum_proportion(self.records)
        self.p_norm = _minmax(np.asarray([share[d] for d in self.doc_ids]))
        self.vr_norm = _minmax(np.asarray([vr[d] for d in self.doc_ids], dtype=np.float64))
        self._text: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def text_scores(self, query: str) -> tuple[np.ndarray, np.ndarray]:
        """(raw log-likelihoods, normalized) over all documents."""
        hit = self._text.get(query)
        if hit is None:
            raw = score_all(self.index, query)
            hit = self._text[query] = (raw, _minmax(raw))
        return hit

    def search(self, query: str, factors: EffectFactors, k: int = 10) -> list[ScoreBreakdown]:
        if k < 1:
            raise ValueError("k must be >= 1")
        _, l_norm = self.text_scores(query)
        m = factors.text_weight * l_norm + factors.a * self.p_norm + factors.b * self.vr_norm
        return [self._row(i, l_norm, m) for i in rank_rows(m, self.doc_ids)[:k]]

    def search_text_only(self, query: str, k: int = 10) -> list[ScoreBreakdown]:
        """Baseline ranked by raw text relevance alone; M equals L_norm."""
        raw, l_norm = self.text_scores(query)
        return [self._row(i, l_norm, l_norm) for i in rank_rows(raw, self.doc_ids)[:k]]

    def ranking(self, query: str, factors: EffectFactors | None, k: int = 10) -> list[str]:
        rows = self.search(query, factors, k) if factors is not None else self.search_text_only(query, k)
        return [r.doc_id for r in rows]

    def _row(self, i: int, l_norm: np.ndarray, m: np.ndarray) -> ScoreBreakdown:
        rec = self.records[i]
        return ScoreBreakdown(
            rec.doc_id,
            float(l_norm[i]),
            float(self.p_norm[i]),
            float(self.vr_norm[i]),
            float(m[i]),
            rec.real_link,
            rec.playpage_url,
        )


def search(
    index: LmIndex,
    records: Sequence[PavideogeRecord],
    videorank: Mapping[str, float] | None,
    query: str,
    f: EffectFactors,
    k: int = 10,
) -> list[ScoreBreakdown]:
    return Searcher(index, records, videorank).search(query, f, k)
