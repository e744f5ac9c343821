import logging
import random

import pytest

from pavideoge.errors import BadInputFile, EmptyGrid, EmptyGroup, NoQueries
from pavideoge.extractor import PavideogeRecord, TextInformation
from pavideoge.fusion import EffectFactors, Searcher
from pavideoge.index import TokenizerConfig, build_index
from pavideoge.tuner import (
    GridResult,
    Qrels,
    QuerySet,
    average_precision_over_queries,
    compare_methods,
    grid_pairs,
    grid_search,
    improvement_pct,
    load_groups,
    load_qrels,
    load_queries,
    precision,
)

# reported grid results: (a, b, average precision)
REPORTED_GRID = [
    (0.1, 0.1, 0.8364), (0.1, 0.2, 0.8710), (0.1, 0.3, 0.9011), (0.1, 0.4, 0.9345),
    (0.1, 0.5, 0.7326), (0.1, 0.6, 0.5725), (0.1, 0.7, 0.3382), (0.1, 0.8, 0.2463),
    (0.2, 0.1, 0.7552), (0.2, 0.2, 0.6193), (0.2, 0.3, 0.5710), (0.2, 0.4, 0.5850),
    (0.2, 0.5, 0.3579), (0.2, 0.6, 0.2434), (0.2, 0.7, 0.2198), (0.3, 0.1, 0.5187),
    (0.3, 0.2, 0.4032), (0.3, 0.3, 0.4147), (0.3, 0.4, 0.3086), (0.3, 0.5, 0.2083),
    (0.3, 0.6, 0.1701), (0.4, 0.1, 0.4017), (0.4, 0.2, 0.2545), (0.4, 0.3, 0.3104),
    (0.4, 0.4, 0.1452), (0.4, 0.5, 0.1597), (0.5, 0.1, 0.2146), (0.5, 0.2, 0.1562),
    (0.5, 0.3, 0.1573), (0.5, 0.4, 0.1070), (0.6, 0.1, 0.1955), (0.6, 0.2, 0.1008),
    (0.6, 0.3, 0.0621), (0.7, 0.1, 0.0368), (0.7, 0.2, 0.0376), (0.8, 0.1, 0.0210),
]

# reported group results: group -> (fused, text-only, printed improvement %)
REPORTED_GROUPS = {
    1: (0.9271, 0.8438, 9.232),
    2: (0.9106, 0.8732, 4.283),
    3: (0.8491, 0.8507, -0.188),
    4: (0.8788, 0.8673, 1.326),
    5: (0.8480, 0.7392, 14.719),
    6: (0.8415, 0.8410, 0.0),
}


class Fixed:
    """Ranking system returning canned lists, ignoring the factors."""

    def __init__(self, lists):
        self.lists = lists
        self.calls = []

    def ranking(self, query, factors, k=10):
        self.calls.append((query, factors))
        return self.lists[query][:k]


def qrels_for(pairs):
    return Qrels({(q, d): 1 for q, d in pairs})


class TestPrecision:
    def test_four_of_ten(self):
        ranked = [f"d{i}" for i in range(10)]
        assert precision(ranked, qrels_for([("q", f"d{i}") for i in (0, 3, 5, 9)]), "q") == 0.4

    def test_all_relevant(self):
        ranked = ["a", "b", "c"]
        assert precision(ranked, qrels_for([("q", d) for d in ranked]), "q") == 1.0

    def test_empty(self):
        assert precision([], qrels_for([("q", "a")]), "q") == 0.0

    def test_short_list_uses_its_length(self):
        assert precision(["a", "b"], qrels_for([("q", "a")]), "q", k=10) == 0.5

    def test_unjudged_is_non_relevant(self):
        assert precision(["a"], Qrels({("q", "a"): 0}), "q") == 0.0
        assert precision(["a"], Qrels({}), "q") == 0.0

    def test_tail_permutation_invariant(self):
        rng = random.Random(0)
        ranked = [f"d{i}" for i in range(30)]
        qrels = qrels_for([("q", f"d{i}") for i in range(0, 30, 3)])
        base = precision(ranked, qrels, "q", 10)
        for _ in range(20):
            tail = ranked[10:]
            rng.shuffle(tail)
            assert precision(ranked[:10] + tail, qrels, "q", 10) == base

    def test_errors(self):
        with pytest.raises(ValueError):
            precision(["a", "a"], Qrels(), "q")
        with pytest.raises(ValueError):
            precision(["a"], Qrels(), "q", k=0)


class TestAverage:
    def test_two_queries(self):
        sys = Fixed({"x": ["a", "b"], "y": ["c", "d"]})
        qs = QuerySet((("q1", "x"), ("q2", "y")))
        qrels = qrels_for([("q1", "a"), ("q1", "b"), ("q2", "c")])
        assert average_precision_over_queries(qs, sys, qrels) == 0.75

    def test_single(self):
        sys = Fixed({"x": ["a", "b", "c"]})
        qs = QuerySet((("q1", "x"),))
        assert average_precision_over_queries(qs, sys, qrels_for([("q1", "c")])) == pytest.approx(1 / 3)

    def test_sixty_queries_recomputed(self):
        rng = random.Random(11)
        docs = [f"d{i}" for i in range(40)]
        lists = {f"text{i}": rng.sample(docs, rng.randint(0, 15)) for i in range(60)}
        qs = QuerySet(tuple((f"q{i}", f"text{i}") for i in range(60)))
        qrels = qrels_for([(f"q{i}", d) for i in range(60) for d in rng.sample(docs, 8)])
        got = average_precision_over_queries(qs, Fixed(lists), qrels)
        manual = []
        for i in range(60):
            top = lists[f"text{i}"][:10]
            hits = sum(1 for d in top if (f"q{i}", d) in qrels.judgments)
            manual.append(hits / len(top) if top else 0.0)
        assert abs(got - sum(manual) / 60) <= 1e-12

    def test_no_queries(self):
        with pytest.raises(NoQueries):
            average_precision_over_queries(QuerySet(()), Fixed({}), Qrels())

    def test_duplicate_ids(self):
        with pytest.raises(BadInputFile):
            QuerySet((("q", "a"), ("q", "b")))


class TestGrid:
    def test_thirty_six_pairs(self):
        brute = [(i / 10, j / 10) for i in range(1, 9) for j in range(1, 9) if i + j < 10]
        assert grid_pairs() == brute
        assert len(brute) == 36

    def test_matches_reported_rows(self):
        assert sorted((a, b) for a, b, _ in REPORTED_GRID) == grid_pairs()

    def test_inclusion_at_the_boundary(self):
        pairs = set(grid_pairs())
        assert (0.3, 0.6) in pairs and (0.3, 0.7) not in pairs and (0.2, 0.8) not in pairs

    def test_empty_grid(self):
        with pytest.raises(EmptyGrid):
            grid_pairs(0.1, 0.05)
        with pytest.raises(EmptyGrid):
            grid_pairs(0.0)

    def test_reported_grid_argmax(self):
        r = GridResult.from_rows(REPORTED_GRID)
        assert r.best == (0.1, 0.4)
        assert r.best_precision == 0.9345

    def test_tie_break(self):
        r = GridResult.from_rows([(0.3, 0.1, 0.5), (0.2, 0.4, 0.5), (0.2, 0.3, 0.5), (0.1, 0.1, 0.4)])
        assert r.best == (0.2, 0.3)

    def test_each_cell_once(self, caplog):
        sys = Fixed({"x": ["a"]})
        with caplog.at_level(logging.WARNING):
            r = grid_search(QuerySet((("q", "x"),)), qrels_for([("q", "a")]), sys)
        assert "FewQueries" in caplog.text
        assert len(r.rows) == 36
        assert sorted((f.a, f.b) for _, f in sys.calls) == grid_pairs()
        assert r.best_precision == max(p for _, _, p in r.rows)


def playnum_dominant():
    """Four docs with identical text: only a=0.8, b=0.1 lifts ``c_rel`` above ``b_vr``.

    Normalized (P, VR): a_hi (1, 1), b_vr (0.5, 1), c_rel (0.63, 0), d_lo (0, 0).
    c_rel beats b_vr iff 0.13 a > b.
    """
    spec = [("a_hi", 100, 1.15), ("b_vr", 50, 1.15), ("c_rel", 63, 0.15), ("d_lo", 0, 0.15)]
    records = [
        PavideogeRecord(d, f"http://www.tudou.com/programs/view/{d}/", None, pn, vr,
                        TextInformation("dance", (), "", (), ()))
        for d, pn, vr in spec
    ]
    index = build_index(records, TokenizerConfig("whitespace"))
    qs = QuerySet((("q1", "dance"),))
    return Searcher(index, records), qs, qrels_for([("q1", "a_hi"), ("q1", "c_rel")]), spec


def exhaustive(spec, relevant, a, b, k):
    pn = {d: p for d, p, _ in spec}
    vr = {d: v for d, _, v in spec}

    def scale(m):
        lo, hi = min(m.values()), max(m.values())
        return {d: (x - lo) / (hi - lo) for d, x in m.items()}

    pn, vr = scale(pn), scale(vr)
    score = {d: (1 - a - b) * 1.0 + a * pn[d] + b * vr[d] for d in pn}
    top = sorted(score, key=lambda d: (-score[d], d))[:k]
    return sum(d in relevant for d in top) / k


def test_playnum_dominant_argmax_at_grid_max():
    searcher, qs, qrels, spec = playnum_dominant()
    r = grid_search(qs, qrels, searcher, k=2)
    assert r.best == (0.8, 0.1)
    for a, b, p in r.rows:
        assert p == exhaustive(spec, {"a_hi", "c_rel"}, a, b, 2)
    assert [p for *_, p in r.rows].count(1.0) == 1


class TestCompare:
    def test_reported_percentages_groups_2_to_5(self):
        for g in (2, 3, 4, 5):
            use, base, pct = REPORTED_GROUPS[g]
            assert round(improvement_pct(use, base), 3) == pct

    def test_reported_group_6_near_zero(self):
        use, base, _ = REPORTED_GROUPS[6]
        assert abs(improvement_pct(use, base)) < 0.1

    def test_reported_group_1_differs_from_its_values(self):
        use, base, pct = REPORTED_GROUPS[1]
        assert round(improvement_pct(use, base), 3) == 9.872
        assert pct == 9.232

    def test_reported_mean_improvement(self):
        assert round(sum(p for *_, p in REPORTED_GROUPS.values()) / 6, 3) == 4.895

    def test_self_comparison_is_zero(self):
        sys = Fixed({"x": ["a", "b"], "y": ["b", "c"]})
        qs = QuerySet((("q1", "x"), ("q2", "y")))
        t = compare_methods(qs, qrels_for([("q1", "a"), ("q2", "c")]), sys, {"1": ["q1"], "2": ["q2"]},
                            EffectFactors(), baseline=sys)
        assert [r.improvement for r in t.rows] == [0.0, 0.0]
        assert t.mean_improvement == 0.0

    def test_fusion_helps_by_construction(self):
        searcher, qs, qrels, _ = playnum_dominant()
        t = compare_methods(qs, qrels, searcher, {"1": ["q1"]}, EffectFactors(0.8, 0.1), k=2)
        (row,) = t.rows
        assert (row.fused, row.baseline) == (1.0, 0.5)
        assert row.improvement == 100.0

    def test_groups_ordered_and_formatted(self):
        sys = Fixed({f"t{i}": ["a"] for i in range(12)})
        qs = QuerySet(tuple((f"q{i}", f"t{i}") for i in range(12)))
        names = ["10", "2", "3", "4", "5", "1"]
        groups = {g: [f"q{i}" for i in range(12) if i % 6 == n] for n, g in enumerate(names)}
        t = compare_methods(qs, qrels_for([("q0", "a")]), sys, groups, EffectFactors())
        assert [r.group for r in t.rows] == ["1", "2", "3", "4", "5", "10"]
        lines = t.format_table().splitlines()
        assert lines[0].split("\t") == ["group", "use_pavideoge", "no_use_pavideoge", "improvement_pct"]
        assert len(lines) == 8 and lines[-1].startswith("mean\t")

    def test_bad_groups(self):
        sys = Fixed({"x": ["a"], "y": ["a"]})
        qs = QuerySet((("q1", "x"), ("q2", "y")))
        with pytest.raises(EmptyGroup):
            compare_methods(qs, Qrels(), sys, {"1": []}, EffectFactors())
        with pytest.raises(BadInputFile):
            compare_methods(qs, Qrels(), sys, {"1": ["q1"], "2": ["q1"]}, EffectFactors())
        with pytest.raises(BadInputFile):
            compare_methods(qs, Qrels(), sys, {"1": ["q9"]}, EffectFactors())

    def test_zero_baseline(self):
        assert improvement_pct(0.0, 0.0) == 0.0
        assert improvement_pct(0.5, 0.0) == float("inf")


def test_loaders(tmp_path):
    (tmp_path / "q.tsv").write_text("q1\thip hop\nq2\t舞蹈\n", encoding="utf-8")
    (tmp_path / "r.tsv").write_text("q1\td1\t1\nq1\td2\t0\n", encoding="utf-8")
    (tmp_path / "g.tsv").write_text("q1\t1\nq2\t2\n", encoding="utf-8")
    assert load_queries(tmp_path / "q.tsv").entries == (("q1", "hip hop"), ("q2", "舞蹈"))
    assert load_qrels(tmp_path / "r.tsv").judgments == {("q1", "d1"): 1, ("q1", "d2"): 0}
    assert load_groups(tmp_path / "g.tsv") == {"1": ["q1"], "2": ["q2"]}
    (tmp_path / "bad.tsv").write_text("q1\td1\t2\n", encoding="utf-8")
    with pytest.raises(BadInputFile):
        load_qrels(tmp_path / "bad.tsv")
