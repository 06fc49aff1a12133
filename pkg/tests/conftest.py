from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from oprf.corpus import Corpus, PseudoQuery, Qrels, Topic, load_corpus, load_pseudo_queries, load_qrels, load_topics
from oprf.dense import EmbeddingMatrix, PrfConfig, embed_texts
from oprf.lexical import InvertedIndex, build_index
from oprf.offline import ModelRegistry, OfflineConfig, ResultStore, ScoreModel, prepare
from oprf.online import SearchEngine
from oprf.synth import SynthFixture, generate

DATA = Path(__file__).parent / "data"
TOY = DATA / "toy"
TOY_DIM = 64
TOY_K = 10


@dataclass
class Assets:
    corpus: Corpus
    pseudo_queries: list[PseudoQuery]
    topics: list[Topic]
    qrels: Qrels
    doc_embeddings: EmbeddingMatrix
    store: ResultStore
    pq_index: InvertedIndex
    doc_index: InvertedIndex

    @property
    def engine(self) -> SearchEngine:
        return SearchEngine(self.store, self.pq_index, self.doc_index)


def toy_assets(workers: int = 1) -> Assets:
    corpus = load_corpus(TOY / "docs.tsv")
    pqs = load_pseudo_queries(TOY / "pq.tsv", corpus)
    docs = embed_texts(corpus.texts, TOY_DIM)
    registry = ModelRegistry([ScoreModel("dense", "dense", docs=docs)])
    store = prepare(pqs, registry, OfflineConfig(k=TOY_K, m=2), doc_ids=corpus.ext_ids, workers=workers)
    return Assets(
        corpus, pqs, load_topics(TOY / "topics.tsv"), load_qrels(TOY / "qrels.txt"), docs, store,
        build_index((pq.pq_id, pq.text) for pq in pqs), build_index(enumerate(corpus.texts)),
    )


def synth_assets(fixture: SynthFixture, k: int, prf: PrfConfig = PrfConfig(), workers: int = 1,
                 lexical: bool = False) -> Assets:
    models = [ScoreModel("dense", "dense", docs=fixture.doc_embeddings, query_vectors=fixture.pq_embeddings, prf=prf)]
    doc_index = build_index(enumerate(fixture.corpus.texts))
    if lexical:
        models.append(ScoreModel("lex", "lexical", index=doc_index))
    store = prepare(fixture.pseudo_queries, ModelRegistry(models), OfflineConfig(k=k, m=5),
                    doc_ids=fixture.corpus.ext_ids, workers=workers)
    pq_index = build_index((pq.pq_id, pq.text) for pq in fixture.pseudo_queries)
    return Assets(fixture.corpus, fixture.pseudo_queries, fixture.topics, fixture.qrels, fixture.doc_embeddings,
                  store, pq_index, doc_index)


@pytest.fixture(scope="session")
def toy() -> Assets:
    return toy_assets()


@pytest.fixture(scope="session")
def small_fixture() -> SynthFixture:
    return generate(seed=7, n_docs=200, m=5, dim=32)


@pytest.fixture(scope="session")
def small(small_fixture) -> Assets:
    return synth_assets(small_fixture, k=20, prf=PrfConfig("avg", 3), lexical=True)
