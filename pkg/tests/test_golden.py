"""Frozen end-to-end run on the ten-document toy collection (s=2, hashed dense model)."""

import numpy as np

from oprf.corpus import RunFile, write_run
from oprf.dense import hash_embed
from oprf.online import OnlineConfig, run_topics

from conftest import TOY, TOY_DIM, TOY_K, toy_assets
from oracles import bm25_oracle, dense_oracle, equation_oracle, ranked_oracle

GOLDEN = TOY / "golden.trec"


def sequential_oracle_run(assets, s=2) -> RunFile:
    tok = assets.pq_index.tokenizer
    pq_tokens = [tok.tokenize(pq.text) for pq in assets.pseudo_queries]
    rows = assets.doc_embeddings.vectors.astype(np.float64).tolist()
    scored = {}
    for topic in assets.topics:
        selected = ranked_oracle(bm25_oracle(pq_tokens, tok.tokenize(topic.text)), s)
        columns = {}
        for i, (pq_id, _) in enumerate(selected):
            q = hash_embed(assets.pseudo_queries[pq_id].text, TOY_DIM).astype(np.float64).tolist()
            # stored scores are float32
            columns[(i, "dense")] = {d: float(np.float32(v)) for d, v in dense_oracle(rows, q, TOY_K)}
        final = equation_oracle([v for _, v in selected], columns)
        scored[topic.qid] = [(assets.corpus.ext_id(d), v) for d, v in final.items()]
    return RunFile.from_scored(scored, "oprf")


def engine_run_bytes(tmp_path, workers: int, name: str) -> bytes:
    assets = toy_assets(workers)
    run, _ = run_topics(assets.engine, assets.topics, OnlineConfig(s=2))
    write_run(tmp_path / name, run)
    return (tmp_path / name).read_bytes()


def test_oracle_reproduces_frozen_file(toy, tmp_path):
    write_run(tmp_path / "oracle.trec", sequential_oracle_run(toy))
    assert (tmp_path / "oracle.trec").read_bytes() == GOLDEN.read_bytes()


def test_engine_matches_golden_across_runs_and_workers(tmp_path):
    golden = GOLDEN.read_bytes()
    assert engine_run_bytes(tmp_path, 1, "a.trec") == golden
    assert engine_run_bytes(tmp_path, 1, "b.trec") == golden
    assert engine_run_bytes(tmp_path, 4, "c.trec") == golden
