import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oprf.corpus import Qrels, RunFile
from oprf.evaluation import (
    MetricConfig,
    evaluate,
    latency_report,
    map_at,
    ndcg_at,
    paired_ttest,
    percentile,
    read_timings,
    recall_at,
)
from oprf.online import Timing, write_timings

L2 = math.log2


def qrels(nested):
    return Qrels({(q, d): g for q, docs in nested.items() for d, g in docs.items()})


QRELS = qrels({
    "q1": {"a": 3, "b": 2, "c": 0, "d": 1},
    "q2": {"e": 1},
    "q3": {"g": 2, "h": 2},
    "q4": {"k": 0},
    "q5": {"m": 1, "n": 1},
})


def ranked(docs):
    return [(d, float(len(docs) - i)) for i, d in enumerate(docs)]


RUN = RunFile.from_scored({
    "q1": ranked(["c", "a", "d", "x", "b"]),
    "q2": ranked(["f", "g", "h", "e"]),
    "q3": ranked(["i", "j"]),
    "q4": ranked(["k"]),
    "q5": ranked(["n", "m"]),
})

NDCG = {
    "q1": (7 / L2(3) + 1 / L2(4) + 3 / L2(6)) / (7 + 3 / L2(3) + 1 / L2(4)),
    "q2": 1 / L2(5),
    "q3": 0.0,
    "q4": 0.0,
    "q5": 1.0,
}
AP = {"q1": (1 / 2 + 2 / 3 + 3 / 5) / 3, "q2": 1 / 4, "q3": 0.0, "q4": 0.0, "q5": 1.0}
RECALL = {"q1": 1.0, "q2": 1.0, "q3": 0.0, "q5": 1.0}


def test_ndcg_hand_values():
    res = ndcg_at(RUN, QRELS, 10)
    for q, v in NDCG.items():
        assert res.per_query[q] == pytest.approx(v, abs=1e-9)
    assert res.mean == pytest.approx(sum(NDCG.values()) / 5, abs=1e-9)


def test_map_hand_values():
    res = map_at(RUN, QRELS, 1000, threshold=1)
    for q, v in AP.items():
        assert res.per_query[q] == pytest.approx(v, abs=1e-9)
    assert res.mean == pytest.approx(sum(AP.values()) / 5, abs=1e-9)


def test_recall_hand_values():
    res = recall_at(RUN, QRELS, 1000, threshold=1)
    assert res.per_query == pytest.approx(RECALL, abs=1e-9)
    assert res.mean == pytest.approx(3 / 4, abs=1e-9)
    assert recall_at(RUN, QRELS, 3, threshold=1).per_query["q1"] == pytest.approx(2 / 3)


def test_graded_default_threshold_is_two():
    res = evaluate(RUN, QRELS)
    assert set(res) == {"ndcg@10", "map", "r@1k"}
    # at grade >= 2 only q1 {a, b} and q3 {g, h} have relevant documents
    assert res["map"].per_query["q1"] == pytest.approx((1 / 2 + 2 / 5) / 2, abs=1e-9)
    assert res["map"].mean == pytest.approx((1 / 2 + 2 / 5) / 2 / 5, abs=1e-9)
    assert set(res["r@1k"].per_query) == {"q1", "q3"}
    binary = qrels({"q": {"a": 1}})
    assert MetricConfig().threshold(binary) == 1


def test_trivial_cases():
    qr = qrels({"q": {"a": 1}})
    assert map_at(RunFile.from_scored({"q": ranked(["a"])}), qr).mean == 1.0
    assert map_at(RunFile.from_scored({"q": ranked(["x", "y", "z", "a"])}), qr).mean == 0.25
    ideal = RunFile.from_scored({"q1": ranked(["a", "b", "d", "c"])})
    assert ndcg_at(ideal, qrels({"q1": QRELS.judgments("q1")})).mean == pytest.approx(1.0)
    assert recall_at(RunFile.from_scored({"q": ranked(["x"])}), qr).mean == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=8, max_size=8, unique=True), st.integers(0, 2**31))
def test_monotone_rescaling_invariance(scores, seed):
    rng = np.random.default_rng(seed)
    docs = [f"d{i}" for i in range(8)]
    qr = qrels({"q": {d: int(g) for d, g in zip(docs, rng.integers(0, 4, size=8))}})
    a = RunFile.from_scored({"q": [(d, float(s)) for d, s in zip(docs, scores)]})
    b = RunFile.from_scored({"q": [(d, 0.5 * s**3 + 10) for d, s in zip(docs, scores)]})
    ea, eb = evaluate(a, qr), evaluate(b, qr)
    for key in ea:
        assert ea[key].per_query == eb[key].per_query
        assert 0.0 <= ea[key].mean <= 1.0


# two-tailed critical values from a printed t-table, df = 9
T_TABLE = [(2.262, 0.05), (3.250, 0.01), (1.833, 0.10)]


@pytest.mark.parametrize("t_target,p_table", T_TABLE)
def test_ttest_matches_t_table(t_target, p_table):
    e = np.array([0.3, -0.1, 0.25, -0.4, 0.05, 0.2, -0.15, -0.3, 0.1, 0.05])
    e -= e.mean()
    sd = e.std(ddof=1)
    mu = t_target * sd / math.sqrt(10)
    diffs = e + mu
    a = {f"q{i}": 0.5 + float(x) for i, x in enumerate(diffs)}
    b = {f"q{i}": 0.5 for i in range(10)}
    res = paired_ttest(a, b)
    hand_t = diffs.mean() / (diffs.std(ddof=1) / math.sqrt(10))
    assert res.t == pytest.approx(hand_t, rel=1e-9)
    assert res.t == pytest.approx(t_target, rel=1e-9)
    assert res.p == pytest.approx(p_table, abs=1e-4)
    assert paired_ttest(b, a).t == pytest.approx(-res.t, rel=1e-12)


def test_ttest_conventions():
    a = {f"q{i}": float(i) for i in range(4)}
    assert paired_ttest(a, a).p == 1.0
    shifted = paired_ttest({q: v + 1 for q, v in a.items()}, a)
    assert shifted.p == 0.0 and shifted.degenerate
    with pytest.raises(ValueError):
        paired_ttest(a, {"q0": 0.0, "zz": 1.0, "q2": 0.0, "q3": 0.0})


def write_tab(path, totals):
    write_timings(path, {f"q{i}": Timing(total_us=t, match_us=t / 2) for i, t in enumerate(totals)})


def test_latency_multiple_and_constant(tmp_path):
    write_tab(tmp_path / "a.csv", [1000.0])
    write_tab(tmp_path / "b.csv", [500.0])
    rep = latency_report({"a": tmp_path / "a.csv", "b": tmp_path / "b.csv"}, baseline="b")
    assert rep["a"]["multiple"] == pytest.approx(2.0)
    write_tab(tmp_path / "c.csv", [42.0] * 7)
    c = latency_report({"c": tmp_path / "c.csv"})["c"]["total_us"]
    assert c["mean"] == c["p50"] == c["p95"] == pytest.approx(42.0)


def test_latency_percentiles_lognormal(tmp_path):
    values = np.random.default_rng(3).lognormal(6, 1, size=501)
    write_tab(tmp_path / "t.csv", values.tolist())
    totals = read_timings(tmp_path / "t.csv")["total_us"]
    s = sorted(totals.tolist())
    # position (n-1)q/100 lands exactly on an element for n = 501
    assert percentile(totals, 50) == s[250]
    assert percentile(totals, 95) == s[475]
    assert percentile(totals, 90) == s[450]
    assert percentile([1.0, 2.0], 50) == 1.5


def test_latency_empty_csv(tmp_path):
    (tmp_path / "e.csv").write_text("qid,match_us,gather_us,aggregate_us,sparse_us,total_us\n")
    with pytest.raises(ValueError):
        latency_report({"e": tmp_path / "e.csv"})
