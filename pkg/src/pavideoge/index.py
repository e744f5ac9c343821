"""Tokenization and smoothed query-likelihood scoring.

Document models use linear interpolation with the collection model:

    p(w|d) = (1 - lam) * c(w;d) / |d| + lam * cf(w) / |C|

Query terms that never occur in the collection are scored with the floor
1 / (|C| + |V|). All scoring happens in log space.
"""

from __future__ import annotations

import json
import math
import os
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AllDocsEmpty, BadIndexFile, EmptyCollection, EmptyQuery, UnknownDoc
from .extractor import PavideogeRecord
from .fileio import atomic_write_text

INDEX_MAGIC = "PAVIDEOGE-LMINDEX"
INDEX_VERSION = 1
INDEX_FIELDS = ("all", "title-tags")
TOKENIZER_MODES = ("whitespace", "cjk-bigram-mixed")

_CJK_RANGES = (
    (0x3040, 0x30FF),  # kana
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xAC00, 0xD7AF),  # hangul syllables
    (0xF900, 0xFAFF),
    (0x20000, 0x2FA1F),
)


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


@dataclass(frozen=True)
class TokenizerConfig:
    mode: str = "cjk-bigram-mixed"
    lowercase: bool = True

    def __post_init__(self) -> None:
        if self.mode not in TOKENIZER_MODES:
            raise ValueError(f"tokenizer mode must be one of {TOKENIZER_MODES}, got {self.mode!r}")


def _split_words(text: str) -> list[str]:
    # punctuation and symbols act as separators
    chars = [" " if unicodedata.category(c)[0] in "PSZC" else c for c in text]
    return "".join(chars).split()


def _cjk_runs(word: str) -> Iterable[str]:
    run: list[str] = []
    run_cjk = False
    for ch in word:
        c = is_cjk(ch)
        if run and c != run_cjk:
            yield from _emit(run, run_cjk)
            run = []
        run.append(ch)
        run_cjk = c
    if run:
        yield from _emit(run, run_cjk)


def _emit(run: list[str], cjk: bool) -> Iterable[str]:
    if not cjk or len(run) == 1:
        yield "".join(run)
    else:
        for i in range(len(run) - 1):
            yield run[i] + run[i + 1]


def tokenize(text: str, cfg: TokenizerConfig = TokenizerConfig()) -> list[str]:
    if cfg.lowercase:
        text = text.lower()
    words = _split_words(text)
    if cfg.mode == "whitespace":
        return words
    return [t for w in words for t in _cjk_runs(w)]


@dataclass
class LmIndex:
    doc_ids: list[str]
    vocabulary: dict[str, int]
    doc_term_counts: list[dict[str, int]]
    doc_lengths: list[int]
    collection_counts: dict[str, int]
    collection_length: int
    lam: float = 0.5
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)
    _postings: dict | None = field(default=None, init=False, repr=False, compare=False)
    _row: dict | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def empty_docs(self) -> list[str]:
        return [d for d, n in zip(self.doc_ids, self.doc_lengths) if n == 0]

    @property
    def floor(self) -> float:
        return 1.0 / (self.collection_length + len(self.vocabulary))

    def row(self, doc_id: str) -> int:
        if self._row is None:
            self._row = {d: i for i, d in enumerate(self.doc_ids)}
        try:
            return self._row[doc_id]
        except KeyError:
            raise UnknownDoc(f"unknown document {doc_id!r}") from None

    def postings(self, term: str) -> tuple[np.ndarray, np.ndarray]:
        """(document rows, counts) for ``term``."""
        if self._postings is None:
            acc: dict[str, tuple[list[int], list[int]]] = {}
            for i, counts in enumerate(self.doc_term_counts):
                for t, c in counts.items():
                    rows, cs = acc.setdefault(t, ([], []))
                    rows.append(i)
                    cs.append(c)
            self._postings = {
                t: (np.asarray(r, dtype=np.int64), np.asarray(c, dtype=np.float64)) for t, (r, c) in acc.items()
            }
        return self._postings.get(term, (np.empty(0, dtype=np.int64), np.empty(0)))

    def term_probability(self, term: str, doc_id: str) -> float:
        """Smoothed p(term | doc) for an in-vocabulary term."""
        i = self.row(doc_id)
        length = self.doc_lengths[i]
        seen = self.doc_term_counts[i].get(term, 0) / length if length else 0.0
        return (1.0 - self.lam) * seen + self.lam * self.collection_counts.get(term, 0) / self.collection_length

    def dumps(self) -> str:
        body = {
            "lambda": self.lam,
            "tokenizer": {"mode": self.tokenizer.mode, "lowercase": self.tokenizer.lowercase},
            "collection_length": self.collection_length,
            "vocabulary": sorted(self.vocabulary, key=self.vocabulary.__getitem__),
            "docs": [
                {"doc_id": d, "length": n, "counts": dict(sorted(c.items()))}
                for d, n, c in zip(self.doc_ids, self.doc_lengths, self.doc_term_counts)
            ],
        }
        return f"{INDEX_MAGIC} {INDEX_VERSION}\n" + json.dumps(body, ensure_ascii=False, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "LmIndex":
        header, _, payload = text.partition("\n")
        parts = header.split()
        if len(parts) != 2 or parts[0] != INDEX_MAGIC:
            raise BadIndexFile("missing index header")
        if parts[1] != str(INDEX_VERSION):
            raise BadIndexFile(f"unsupported index version {parts[1]}")
        try:
            body = json.loads(payload)
            vocab = {t: i for i, t in enumerate(body["vocabulary"])}
            docs = body["docs"]
            cf: dict[str, int] = {}
            for d in docs:
                for t, c in d["counts"].items():
                    cf[t] = cf.get(t, 0) + c
            index = cls(
                doc_ids=[d["doc_id"] for d in docs],
                vocabulary=vocab,
                doc_term_counts=[dict(d["counts"]) for d in docs],
                doc_lengths=[d["length"] for d in docs],
                collection_counts=dict(sorted(cf.items())),
                collection_length=body["collection_length"],
                lam=body["lambda"],
                tokenizer=TokenizerConfig(**body["tokenizer"]),
            )
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise BadIndexFile(f"malformed index body: {exc}") from None
        if sum(index.doc_lengths) != index.collection_length:
            raise BadIndexFile("document lengths do not sum to the collection length")
        return index


def save_index(index: LmIndex, path: str | os.PathLike) -> None:
    atomic_write_text(path, index.dumps())


def load_index(path: str | os.PathLike) -> LmIndex:
    with open(path, encoding="utf-8") as fh:
        return LmIndex.loads(fh.read())


def build_index_from_texts(
    docs: Sequence[tuple[str, str]],
    cfg: TokenizerConfig = TokenizerConfig(),
    lam: float = 0.5,
) -> LmIndex:
    """Index ``(doc_id, text)`` pairs; the output is ordered by doc_id."""
    if not docs:
        raise EmptyCollection("no documents to index")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    doc_ids, counts, lengths = [], [], []
    cf: dict[str, int] = {}
    for doc_id, text in sorted(docs):
        c: dict[str, int] = {}
        for tok in tokenize(text, cfg):
            c[tok] = c.get(tok, 0) + 1
        for t, n in c.items():
            cf[t] = cf.get(t, 0) + n
        doc_ids.append(doc_id)
        counts.append(dict(sorted(c.items())))
        lengths.append(sum(c.values()))
    total = sum(lengths)
    if total == 0:
        raise AllDocsEmpty("every document is empty")
    vocab = {t: i for i, t in enumerate(sorted(cf))}
    return LmIndex(doc_ids, vocab, counts, lengths, dict(sorted(cf.items())), total, lam, cfg)


def build_index(
    records: Iterable[PavideogeRecord],
    cfg: TokenizerConfig = TokenizerConfig(),
    lam: float = 0.5,
    fields: str = "all",
) -> LmIndex:
    """Index each record's flattened text, or only title and tags with ``fields="title-tags"``."""
    if fields not in INDEX_FIELDS:
        raise ValueError(f"fields must be one of {INDEX_FIELDS}, got {fields!r}")
    if fields == "all":
        docs = [(r.doc_id, r.text.flattened) for r in records]
    else:
        docs = [(r.doc_id, r.text.title_and_tags) for r in records]
    return build_index_from_texts(docs, cfg, lam)


def _query_terms(index: LmIndex, query: Sequence[str] | str) -> list[str]:
    terms = tokenize(query, index.tokenizer) if isinstance(query, str) else list(query)
    if not terms:
        raise EmptyQuery("query has no terms after tokenization")
    return terms


def score_query_likelihood(index: LmIndex, query: Sequence[str], doc_id: str) -> float:
    """log p(query | doc) for one document; ``query`` is a list of terms."""
    terms = _query_terms(index, query)
    index.row(doc_id)
    total = 0.0
    for t in terms:
        if t in index.collection_counts:
            total += math.log(index.term_probability(t, doc_id))
        else:
            total += math.log(index.floor)
    return total


def score_all(index: LmIndex, query: Sequence[str] | str) -> np.ndarray:
    """log p(query | d) for every document, in index row order."""
    terms = _query_terms(index, query)
    n = len(index.doc_ids)
    lengths = np.asarray(index.doc_lengths, dtype=np.float64)
    safe = np.where(lengths > 0, lengths, 1.0)
    scores = np.zeros(n)
    for t in terms:
        cf = index.collection_counts.get(t, 0)
        if cf == 0:
            scores += math.log(index.floor)
            continue
        p = np.full(n, index.lam * cf / index.collection_length)
        rows, counts = index.postings(t)
        p[rows] += (1.0 - index.lam) * (counts / safe[rows])
        scores += np.log(p)
    return scores


def rank_rows(scores: np.ndarray, doc_ids: Sequence[str]) -> list[int]:
    """Row order by descending score, ties ascending by doc_id."""
    return sorted(range(len(doc_ids)), key=lambda i: (-scores[i], doc_ids[i]))


def retrieve(index: LmIndex, query: str, cfg: TokenizerConfig | None = None, k: int = 10) -> list[tuple[str, float]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = tokenize(query, cfg or index.tokenizer)
    scores = score_all(index, terms)
    order = rank_rows(scores, index.doc_ids)[:k]
    return [(index.doc_ids[i], float(scores[i])) for i in order]
