"""Playpage link graph and videorank.

Videorank is PageRank restricted to playpage-to-playpage links, in the
unnormalized form

    VR(P) = (1 - d) + d * sum(VR(Pi) / C(Pi) for Pi linking to P)

where C(Pi) counts the distinct playpages Pi links to. Pages without
outgoing playpage links pass on nothing, so every score stays >= 1 - d.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import CorpusBundle, doc_id_from_url
from .errors import BadDamping, EmptyGraph, SingularSystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinkGraph:
    nodes: tuple[str, ...]
    out_edges: tuple[tuple[int, ...], ...]
    in_edges: tuple[tuple[int, ...], ...]
    dropped_non_playpage: int = 0
    dropped_out_of_corpus: int = 0

    @property
    def out_degree(self) -> tuple[int, ...]:
        return tuple(len(e) for e in self.out_edges)

    def __len__(self) -> int:
        return len(self.nodes)

    def index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nodes)}

    def edge_list(self) -> list[tuple[str, str]]:
        return [(self.nodes[i], self.nodes[j]) for i, outs in enumerate(self.out_edges) for j in outs]

    @classmethod
    def from_edges(cls, nodes: Iterable[str], edges: Iterable[tuple[str, str]], **counts) -> "LinkGraph":
        """Nodes are sorted; self-loops and duplicate edges are dropped."""
        names = sorted(set(nodes))
        idx = {n: i for i, n in enumerate(names)}
        outs: list[set[int]] = [set() for _ in names]
        for src, dst in edges:
            if src != dst:
                outs[idx[src]].add(idx[dst])
        ins: list[list[int]] = [[] for _ in names]
        for i, targets in enumerate(outs):
            for j in targets:
                ins[j].append(i)
        return cls(
            tuple(names),
            tuple(tuple(sorted(t)) for t in outs),
            tuple(tuple(s) for s in ins),
            **counts,
        )

    def dumps(self) -> str:
        return "".join(f"{s}\t{t}\n" for s, t in self.edge_list())


def build_link_graph(bundle: CorpusBundle) -> LinkGraph:
    profile = bundle.profile
    in_corpus = set(bundle.doc_ids())
    edges = []
    non_playpage = out_of_corpus = 0
    for page in bundle.playpages:
        for link in page.fetched_links:
            if not profile.is_playpage(link):
                non_playpage += 1
                continue
            target = doc_id_from_url(link)
            if target not in in_corpus:
                out_of_corpus += 1
                continue
            edges.append((page.doc_id, target))
    if out_of_corpus:
        logger.info("dropped %d links to playpages outside the corpus", out_of_corpus)
    return LinkGraph.from_edges(
        in_corpus, edges, dropped_non_playpage=non_playpage, dropped_out_of_corpus=out_of_corpus
    )


@dataclass(frozen=True)
class VideorankResult:
    scores: np.ndarray
    d: float
    iterations_run: int
    final_residual: float
    converged: bool
    nodes: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.nodes, self.scores.tolist()))


def _check(graph: LinkGraph, d: float) -> None:
    if not 0.0 < d < 1.0:
        raise BadDamping(f"damping must lie in (0, 1), got {d}")
    if len(graph) == 0:
        raise EmptyGraph("graph has no nodes")


def _edge_arrays(graph: LinkGraph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    src = np.fromiter((i for i, outs in enumerate(graph.out_edges) for _ in outs), dtype=np.int64)
    dst = np.fromiter((j for outs in graph.out_edges for j in outs), dtype=np.int64)
    deg = np.asarray(graph.out_degree, dtype=np.float64)
    return src, dst, deg


def compute_videorank(
    graph: LinkGraph, d: float = 0.85, tol: float = 1e-8, max_iter: int = 200
) -> VideorankResult:
    """Synchronous fixed-point iteration starting from all ones.

    Stops once the largest per-node change is <= ``tol``. If ``max_iter``
    is reached first the scores are still returned, with ``converged`` False.
    """
    _check(graph, d)
    n = len(graph)
    src, dst, deg = _edge_arrays(graph)
    vr = np.ones(n)
    residual = np.inf
    it = 0
    while it < max_iter:
        it += 1
        inflow = np.bincount(dst, weights=vr[src] / deg[src], minlength=n)
        new = (1.0 - d) + d * inflow
        residual = float(np.max(np.abs(new - vr)))
        vr = new
        if residual <= tol:
            break
    converged = residual <= tol
    if not converged:
        logger.info("NotConverged: videorank stopped after %d iterations (residual %.3g)", it, residual)
    return VideorankResult(vr, d, it, residual, converged, graph.nodes)


def videorank_residual(graph: LinkGraph, scores: Sequence[float], d: float) -> np.ndarray:
    """Per-node |VR - ((1-d) + d * inflow)| at the given scores."""
    src, dst, deg = _edge_arrays(graph)
    v = np.asarray(scores, dtype=np.float64)
    rhs = (1.0 - d) + d * np.bincount(dst, weights=v[src] / deg[src], minlength=len(graph))
    return np.abs(v - rhs)


def videorank_oracle(graph: LinkGraph, d: float) -> np.ndarray:
    """Solve (I - d M^T) v = (1 - d) 1 directly; for small graphs only."""
    _check(graph, d)
    n = len(graph)
    if n > 64:
        raise ValueError("oracle is limited to 64 nodes")
    m = np.zeros((n, n))
    for i, outs in enumerate(graph.out_edges):
        for j in outs:
            m[i, j] = 1.0 / len(outs)
    a = np.eye(n) - d * m.T
    try:
        return np.linalg.solve(a, np.full(n, 1.0 - d))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
