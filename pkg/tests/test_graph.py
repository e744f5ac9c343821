import random

import numpy as np
import pytest

from pavideoge.corpus import CorpusBundle, ingest_corpus, make_playpage
from pavideoge.errors import BadDamping, EmptyGraph
from pavideoge.graph import (
    LinkGraph,
    build_link_graph,
    compute_videorank,
    videorank_oracle,
    videorank_residual,
)

from conftest import DATA

VIEW = "http://www.tudou.com/programs/view/{}/"


def random_graph(rng: random.Random, n: int) -> LinkGraph:
    nodes = [f"n{i:02d}" for i in range(n)]
    p = rng.random()
    edges = [(s, t) for s in nodes for t in nodes if s != t and rng.random() < p]
    return LinkGraph.from_edges(nodes, edges)


def bundle_of(profile, pages: dict[str, list[str]]) -> CorpusBundle:
    pp = tuple(
        make_playpage(VIEW.format(k), "".join(f'<a href="{h}">x</a>' for h in links))
        for k, links in sorted(pages.items())
    )
    return CorpusBundle(profile, pp, {}, ())


class TestBuild:
    def test_filters_non_playpages(self, profile):
        b = bundle_of(profile, {
            "A": [VIEW.format("B"), "http://img.tudou.com/x.jpg", "http://www.tudou.com/home/u/"],
            "B": [],
        })
        g = build_link_graph(b)
        assert g.edge_list() == [("A", "B")]
        assert g.dropped_non_playpage == 2

    def test_duplicates_collapse(self, profile):
        g = build_link_graph(bundle_of(profile, {"A": [VIEW.format("B")] * 2, "B": []}))
        assert g.out_degree == (1, 0)

    def test_self_loop_and_out_of_corpus(self, profile):
        g = build_link_graph(bundle_of(profile, {"A": [VIEW.format("A"), VIEW.format("Z")]}))
        assert g.edge_list() == []
        assert g.dropped_out_of_corpus == 1

    def test_hub_links_all_twelve(self, profile):
        linked = ingest_corpus(DATA / "linkpage", profile)
        keys = linked.doc_ids()
        hub = make_playpage(VIEW.format("HUB"), "".join(f'<a href="{VIEW.format(k)}">v</a>' for k in keys))
        g = build_link_graph(CorpusBundle(profile, linked.playpages + (hub,), {}, ()))
        assert g.out_degree[g.index()["HUB"]] == 12

    def test_twelve_link_page_itself(self, profile):
        g = build_link_graph(ingest_corpus(DATA / "linkpage", profile))
        assert g.out_degree[g.index()["--tS6YtjVIQ"]] == 11
        assert g.dropped_non_playpage == 24

    def test_invariants(self, corpus50, profile):
        g = build_link_graph(ingest_corpus(corpus50, profile))
        for i, outs in enumerate(g.out_edges):
            assert i not in outs
            assert len(set(outs)) == len(outs)
            for j in outs:
                assert i in g.in_edges[j]
        assert sum(map(len, g.in_edges)) == sum(g.out_degree)


class TestAnalytic:
    def test_isolated(self):
        r = compute_videorank(LinkGraph.from_edges(["A"], []))
        assert abs(r.scores[0] - 0.15) <= 1e-12

    def test_two_cycle(self):
        r = compute_videorank(LinkGraph.from_edges("AB", [("A", "B"), ("B", "A")]))
        assert np.allclose(r.scores, 1.0, atol=1e-8, rtol=0)

    def test_chain(self):
        r = compute_videorank(LinkGraph.from_edges("ABC", [("A", "B"), ("B", "C")]))
        assert np.allclose(r.scores, [0.15, 0.2775, 0.385875], atol=1e-8, rtol=0)

    def test_edgeless(self):
        r = compute_videorank(LinkGraph.from_edges("ABCDE", []))
        assert np.all(r.scores == 1 - 0.85)

    def test_complete_digraph_symmetric(self):
        nodes = "ABCD"
        g = LinkGraph.from_edges(nodes, [(s, t) for s in nodes for t in nodes])
        r = compute_videorank(g)
        assert np.ptp(r.scores) <= 1e-8
        assert np.allclose(r.scores, 1.0, atol=1e-8)

    def test_oracle_cases(self):
        assert np.allclose(videorank_oracle(LinkGraph.from_edges("AB", [("A", "B"), ("B", "A")]), 0.85), [1, 1])
        assert np.allclose(videorank_oracle(LinkGraph.from_edges("A", []), 0.85), [0.15])


class TestProperties:
    @pytest.mark.parametrize("seed", range(20))
    def test_oracle_residual_and_bound(self, seed):
        rng = random.Random(seed)
        g = random_graph(rng, rng.randint(1, 12))
        tol = 1e-8
        r = compute_videorank(g, tol=tol)
        assert r.converged
        assert r.final_residual <= tol
        assert np.max(np.abs(r.scores - videorank_oracle(g, 0.85))) <= 1e-6
        assert np.min(r.scores) >= 1 - 0.85
        assert np.max(np.abs(videorank_residual(g, r.scores, 0.85))) <= 10 * tol

    def test_insertion_order(self):
        rng = random.Random(3)
        g = random_graph(rng, 10)
        edges = g.edge_list()
        shuffled = edges[:]
        rng.shuffle(shuffled)
        nodes = list(g.nodes)
        rng.shuffle(nodes)
        h = LinkGraph.from_edges(nodes, shuffled)
        assert h == g
        assert compute_videorank(h).as_dict() == compute_videorank(g).as_dict()

    def test_synthetic_corpus(self, corpus50, profile):
        g = build_link_graph(ingest_corpus(corpus50, profile))
        r = compute_videorank(g)
        assert r.converged and r.scores.min() >= 1 - 0.85
        assert np.max(np.abs(r.scores - videorank_oracle(g, 0.85))) <= 1e-6

    def test_not_converged_still_returns(self):
        g = LinkGraph.from_edges("AB", [("A", "B"), ("B", "A")])
        r = compute_videorank(LinkGraph.from_edges("ABC", [("A", "B"), ("B", "C")]), max_iter=1)
        assert not r.converged and r.iterations_run == 1
        assert len(compute_videorank(g).scores) == 2


class TestErrors:
    @pytest.mark.parametrize("d", [0.0, 1.0, -0.1, 1.5])
    def test_bad_damping(self, d):
        with pytest.raises(BadDamping):
            compute_videorank(LinkGraph.from_edges("A", []), d=d)

    def test_empty(self):
        with pytest.raises(EmptyGraph):
            compute_videorank(LinkGraph.from_edges([], []))


def test_dump_format():
    g = LinkGraph.from_edges("AB", [("B", "A")])
    assert g.dumps() == "B\tA\n"
