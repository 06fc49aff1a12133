"""Seeded synthetic collections with planted pseudo-query signal.

Every concept has two surface forms: one used in document text and one
used by queries. Pseudo-queries and topics are drawn from a document's
concepts and mostly use the query form, so lexical matching against the
documents misses them while matching against pseudo-queries finds them.
Embeddings are computed over concept identities, playing the role of an
encoder that knows both forms mean the same thing.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import (
    Corpus,
    PseudoQuery,
    Qrels,
    Topic,
    dedupe_pseudo_queries,
    write_corpus,
    write_pseudo_queries,
    write_qrels,
    write_topics,
)
from .dense import EmbeddingMatrix, embed_texts, save_embeddings

_CONSONANTS = "bdfgklmnprtvz"
# words end in a/o/u after a consonant, which the Porter stemmer leaves alone
_VOWELS = "aou"
_SYLLABLES = [c + v for c in _CONSONANTS for v in _VOWELS]


def _word(i: int, prefix: str) -> str:
    out = []
    while True:
        i, r = divmod(i, len(_SYLLABLES))
        out.append(_SYLLABLES[r])
        if i == 0 and len(out) >= 2:
            break
    return prefix + "".join(out)


def doc_form(concept: int) -> str:
    return _word(concept, "ka")


def query_form(concept: int) -> str:
    return _word(concept, "zu")


def noise_word(j: int) -> str:
    return _word(j, "mo")


@dataclass
class SynthFixture:
    corpus: Corpus
    pq_records: list[tuple[str, str]]
    pseudo_queries: list[PseudoQuery]
    topics: list[Topic]
    qrels: Qrels
    doc_embeddings: EmbeddingMatrix
    pq_embeddings: EmbeddingMatrix
    vocabulary: dict[str, str]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "corpus": out / "docs.tsv",
            "pseudo_queries": out / "pq.tsv",
            "topics": out / "topics.tsv",
            "qrels": out / "qrels.txt",
            "doc_embeddings": out / "docs.emb",
            "pq_embeddings": out / "pq.emb",
        }
        write_corpus(paths["corpus"], self.corpus)
        write_pseudo_queries(paths["pseudo_queries"], self.pq_records)
        write_topics(paths["topics"], self.topics)
        write_qrels(paths["qrels"], self.qrels)
        save_embeddings(paths["doc_embeddings"], self.doc_embeddings)
        save_embeddings(paths["pq_embeddings"], self.pq_embeddings)
        return paths


def _zipf_cdf(n: int, offset: float, exponent: float) -> np.ndarray:
    w = 1.0 / (np.arange(n) + offset) ** exponent
    return np.cumsum(w / w.sum())


def _sample_distinct(rng: np.random.Generator, cdf: np.ndarray, size: int) -> list[int]:
    picked: list[int] = []
    while len(picked) < size:
        for c in np.searchsorted(cdf, rng.random(2 * size), side="right").tolist():
            c = min(c, len(cdf) - 1)
            if c not in picked:
                picked.append(c)
                if len(picked) == size:
                    break
    return picked


def generate(
    seed: int,
    n_docs: int,
    m: int,
    dim: int = 64,
    n_topics: int | None = None,
    query_form_rate: float = 0.8,
) -> SynthFixture:
    if min(n_docs, m, dim) < 1:
        raise ValueError("n_docs, m and dim must be >= 1")
    if not 0.0 <= query_form_rate <= 1.0:
        raise ValueError("query_form_rate must be in [0, 1]")
    n_topics = min(n_docs, 50) if n_topics is None else n_topics
    if not 1 <= n_topics <= n_docs:
        raise ValueError("n_topics must be in 1..n_docs")
    rng = np.random.default_rng(seed)
    n_concepts = max(8, 2 * n_docs)
    n_noise = 300
    concept_cdf = _zipf_cdf(n_concepts, 5.0, 0.7)
    noise_cdf = _zipf_cdf(n_noise, 2.0, 1.0)

    def noise(size: int) -> list[str]:
        idx = np.minimum(np.searchsorted(noise_cdf, rng.random(size), side="right"), n_noise - 1)
        return [noise_word(j) for j in idx.tolist()]

    def render(concepts: list[int], rate: float) -> list[str]:
        return [query_form(c) if rng.random() < rate else doc_form(c) for c in sorted(concepts)]

    doc_concepts: list[list[int]] = []
    doc_filler: list[list[str]] = []
    docs: list[tuple[str, str]] = []
    doc_canon: list[str] = []
    width = len(str(n_docs - 1))
    for i in range(n_docs):
        concepts = _sample_distinct(rng, concept_cdf, int(rng.integers(4, 9)))
        doc_concepts.append(concepts)
        words, canon = [], []
        for c in concepts:
            tf = int(rng.integers(1, 4))
            words += [doc_form(c)] * tf
            canon += [f"c{c}"] * tf
        filler = noise(int(rng.integers(3, 9)))
        doc_filler.append(filler)
        words += filler
        order = rng.permutation(len(words))
        docs.append((f"D{i:0{width}d}", " ".join(words[j] for j in order)))
        doc_canon.append(" ".join(canon + filler))
    corpus = Corpus.from_pairs(docs)

    pq_records: list[tuple[str, str]] = []
    for (doc_id, _), concepts, filler in zip(docs, doc_concepts, doc_filler):
        for _ in range(m):
            size = min(len(concepts), int(rng.integers(2, 4)))
            chosen = rng.choice(concepts, size=size, replace=False).tolist()
            words = render(chosen, query_form_rate)
            if rng.random() < 0.3:
                # drawn from the document itself, so rate 0 yields strict token subsets
                words.append(filler[int(rng.integers(len(filler)))])
            pq_records.append((doc_id, " ".join(words)))
    pseudo_queries = dedupe_pseudo_queries(pq_records, corpus)

    topics: list[Topic] = []
    judgments: dict[tuple[str, str], int] = {}
    twidth = len(str(n_topics))
    for t, d in enumerate(sorted(rng.choice(n_docs, size=n_topics, replace=False).tolist()), start=1):
        concepts = doc_concepts[d]
        size = min(len(concepts), int(rng.integers(2, 4)))
        chosen = rng.choice(concepts, size=size, replace=False).tolist()
        words = render(chosen, min(1.0, query_form_rate + 0.1))
        if rng.random() < 0.5:
            words += noise(1)
        qid = f"T{t:0{twidth}d}"
        topics.append(Topic(qid, " ".join(words)))
        judgments[(qid, docs[d][0])] = 1

    vocabulary: dict[str, str] = {}
    for c in range(n_concepts):
        vocabulary[doc_form(c)] = vocabulary[query_form(c)] = f"c{c}"

    def canonical(text: str) -> str:
        return " ".join(vocabulary.get(w, w) for w in text.split())

    return SynthFixture(
        corpus=corpus,
        pq_records=pq_records,
        pseudo_queries=pseudo_queries,
        topics=topics,
        qrels=Qrels(judgments),
        doc_embeddings=embed_texts(doc_canon, dim),
        pq_embeddings=embed_texts([canonical(pq.text) for pq in pseudo_queries], dim),
        vocabulary=vocabulary,
    )
