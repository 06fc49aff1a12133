import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oprf.lexical import (
    ENGLISH_STOPWORDS,
    Bm25Params,
    Rm3Params,
    Tokenizer,
    bm25_score,
    bm25_search,
    build_index,
    index_to_bytes,
    load_index,
    rm3_expand,
    save_index,
    weighted_search,
)

from oracles import bm25_oracle, ranked_oracle, rm3_oracle

PLAIN = Tokenizer(stemmer="none", stopwords=frozenset())
P = Bm25Params()


def random_items(n, vocab=300, seed=0):
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(vocab)]
    probs = 1 / np.arange(1, vocab + 1)
    probs /= probs.sum()
    return [(i, " ".join(rng.choice(words, size=rng.integers(1, 15), p=probs))) for i in range(n)]


def test_tokenizer_defaults():
    tok = Tokenizer()
    assert tok.tokenize("The Running of the Bulls, in 2024!") == ["run", "bull", "2024"]
    assert tok.tokenize("") == []
    assert "the" in ENGLISH_STOPWORDS


def test_build_index_hand_counts():
    idx = build_index([(0, "a b a"), (1, "b c")], PLAIN)
    as_lists = {t: list(zip(o.tolist(), f.tolist())) for t, (o, f) in idx.postings.items()}
    assert as_lists == {"a": [(0, 2)], "b": [(0, 1), (1, 1)], "c": [(1, 1)]}
    assert idx.avg_doc_length == 2.5
    assert idx.doc_lengths.tolist() == [3, 2]


def test_empty_index():
    idx = build_index([], PLAIN)
    assert idx.N == 0 and idx.avg_doc_length == 0.0
    assert len(bm25_search(idx, P, "anything", 10)) == 0


def test_ordinals_must_be_dense():
    with pytest.raises(ValueError):
        build_index([(0, "a"), (2, "b")], PLAIN)


def test_large_index_matches_term_counts():
    items = random_items(10_000)
    idx = build_index(items, PLAIN)
    collection = Counter()
    for _, text in items:
        collection.update(text.split())
    assert set(idx.postings) == set(collection)
    for term, (ords, tfs) in idx.postings.items():
        assert np.all(np.diff(ords.astype(np.int64)) > 0)
        assert int(tfs.sum()) == collection[term]
    assert idx.doc_lengths.tolist() == [len(t.split()) for _, t in items]


def test_score_zero_without_overlap():
    idx = build_index([(0, "a b"), (1, "c")], PLAIN)
    assert bm25_score(idx, P, ["z"], 0) == 0.0
    assert bm25_score(idx, P, ["c"], 0) == 0.0


def test_single_item_analytic():
    idx = build_index([(0, "a")], PLAIN)
    assert bm25_score(idx, P, ["a"], 0) == pytest.approx(math.log(4 / 3), abs=1e-12)
    assert math.log(4 / 3) == pytest.approx(0.28768, abs=1e-5)


def test_three_doc_apple_pie_oracle():
    texts = ["apple pie with apple", "pie crust recipe", "banana bread"]
    idx = build_index(enumerate(texts), PLAIN)
    expected = bm25_oracle([t.split() for t in texts], ["apple", "pie"])
    for i, e in enumerate(expected):
        assert bm25_score(idx, P, ["apple", "pie"], i) == pytest.approx(e, abs=1e-9)


def test_search_matching_nothing():
    idx = build_index([(0, "a"), (1, "b")], PLAIN)
    assert len(bm25_search(idx, P, "zzz", 5)) == 0


def test_search_exhaustive_when_top_n_large():
    items = random_items(50, vocab=20, seed=1)
    idx = build_index(items, PLAIN)
    docs = [t.split() for _, t in items]
    got = bm25_search(idx, P, "w1 w5 w7", 1000).tolist()
    want = ranked_oracle(bm25_oracle(docs, ["w1", "w5", "w7"]), 1000)
    assert [o for o, _ in got] == [o for o, _ in want]
    assert np.allclose([s for _, s in got], [s for _, s in want], atol=1e-9)


def test_search_matches_full_scan_oracle():
    items = random_items(10_000, seed=2)
    idx = build_index(items, PLAIN)
    docs = [t.split() for _, t in items]
    rng = np.random.default_rng(5)
    for _ in range(50):
        query = [f"w{i}" for i in rng.integers(0, 300, size=rng.integers(1, 4))]
        got = bm25_search(idx, P, " ".join(query), 10).tolist()
        want = ranked_oracle(bm25_oracle(docs, query), 10)
        assert [o for o, _ in got] == [o for o, _ in want]
        assert np.allclose([s for _, s in got], [s for _, s in want], atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(1, 30), st.floats(0.1, 3.0), st.floats(0.0, 1.0))
def test_monotone_in_tf(tf, filler, k1, b):
    p = Bm25Params(k1, b)
    length = tf + filler

    def score(n_a):
        # item 0 keeps the same length; only its tf for "a" changes
        idx = build_index([(0, " ".join(["a"] * n_a + ["x"] * (length - n_a))), (1, "a y")], PLAIN)
        return bm25_score(idx, p, ["a"], 0)

    assert score(tf + 1) >= score(tf)


def test_idf_positive_even_for_ubiquitous_terms():
    idx = build_index([(i, "common") for i in range(5)], PLAIN)
    assert idx.idf("common") > 0


def test_weighted_equal_weights_match_bag_search():
    items = random_items(300, vocab=40, seed=3)
    idx = build_index(items, PLAIN)
    a = bm25_search(idx, P, "w1 w2 w3", 50)
    b = weighted_search(idx, P, {"w1": 0.25, "w2": 0.25, "w3": 0.25}, 50)
    assert a.ordinals.tolist() == b.ordinals.tolist()


def test_weighted_linearity_single_term():
    items = random_items(200, vocab=30, seed=4)
    idx = build_index(items, PLAIN)
    base = weighted_search(idx, P, {"w2": 1.0}, 200)
    scaled = weighted_search(idx, P, {"w2": 0.37}, 200)
    assert base.ordinals.tolist() == scaled.ordinals.tolist()
    np.testing.assert_allclose(scaled.scores, 0.37 * base.scores, rtol=1e-14)


def test_weighted_expanded_query_full_scan():
    items = random_items(500, vocab=50, seed=6)
    idx = build_index(items, PLAIN)
    docs = [t.split() for _, t in items]
    weights = {"w1": 0.4, "w7": 0.35, "w12": 0.25}
    per_term = {t: bm25_oracle(docs, [t]) for t in weights}
    scores = [sum(w * per_term[t][i] for t, w in weights.items()) for i in range(len(docs))]
    want = ranked_oracle(scores, 100)
    got = weighted_search(idx, P, weights, 100).tolist()
    assert [o for o, _ in got] == [o for o, _ in want]
    assert np.allclose([s for _, s in got], [s for _, s in want], atol=1e-9)


def test_ranking_invariant_to_positive_scaling():
    items = random_items(300, vocab=40, seed=8)
    idx = build_index(items, PLAIN)
    w = {"w1": 1.0, "w9": 2.0}
    a = weighted_search(idx, P, w, 100)
    b = weighted_search(idx, P, {t: 7.5 * v for t, v in w.items()}, 100)
    assert a.ordinals.tolist() == b.ordinals.tolist()


RM3_DOCS = [
    "apple pie recipe apple",
    "apple orchard harvest",
    "pie crust butter",
    "car engine repair",
    "orchard pie festival apple",
]


def test_rm3_matches_hand_rolled_oracle():
    idx = build_index(enumerate(RM3_DOCS), PLAIN)
    got = rm3_expand(idx, Rm3Params(fb_docs=2, fb_terms=2, orig_weight=0.5), P, "apple pie")
    want = rm3_oracle([d.split() for d in RM3_DOCS], ["apple", "pie"], 2, 2, 0.5)
    assert set(got) == set(want)
    for t in want:
        assert got[t] == pytest.approx(want[t], abs=1e-9)
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-9)


def test_rm3_no_expansion_cases():
    idx = build_index(enumerate(RM3_DOCS), PLAIN)
    original = {"apple": 0.5, "pie": 0.5}
    assert rm3_expand(idx, Rm3Params(fb_terms=0), P, "apple pie") == original
    assert rm3_expand(idx, Rm3Params(orig_weight=1.0), P, "apple pie") == original
    assert rm3_expand(idx, Rm3Params(), P, "zebra") == {"zebra": 1.0}


def test_rm3_excludes_stopwords_and_sums_to_one():
    idx = build_index(enumerate(RM3_DOCS + ["the apple and the pie"]), Tokenizer())
    weights = rm3_expand(idx, Rm3Params(fb_docs=3, fb_terms=5), P, "apple pie")
    assert not set(weights) & ENGLISH_STOPWORDS
    assert all(w >= 0 for w in weights.values())
    assert sum(weights.values()) == pytest.approx(1.0, abs=1e-9)


def test_index_file_round_trip(tmp_path):
    idx = build_index(random_items(500, seed=9), Tokenizer())
    path = tmp_path / "x.idx"
    save_index(path, idx)
    raw = path.read_bytes()
    assert raw[:8] == b"OPRFLEX1"
    back = load_index(path)
    assert index_to_bytes(back) == raw
    assert back.doc_lengths.tolist() == idx.doc_lengths.tolist()
    assert back.avg_doc_length == idx.avg_doc_length
    assert back.tokenizer == idx.tokenizer
    for t in ["w1", "w42"]:
        assert bm25_search(back, P, t, 20).tolist() == bm25_search(idx, P, t, 20).tolist()


def test_truncated_index_file(tmp_path):
    idx = build_index(random_items(50, seed=10), PLAIN)
    path = tmp_path / "x.idx"
    path.write_bytes(index_to_bytes(idx)[:-3])
    with pytest.raises(ValueError, match="truncated"):
        load_index(path)
