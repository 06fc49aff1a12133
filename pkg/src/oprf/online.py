"""Online path: match pseudo-queries, gather their stored lists, normalize
each list over the candidate set, and aggregate with softmax weights.

Nothing here touches document embeddings; a ``SearchEngine`` holds only the
result store and lexical indexes.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import RunFile, Topic
from .lexical import Bm25Params, InvertedIndex, Rm3Params, bm25_search, rm3_expand, weighted_search
from .offline import ResultStore
from .ranking import Hits, top_k

log = logging.getLogger(__name__)

# pq_id standing for the user query itself when its sparse run is fused in
ORIGINAL_QUERY = -1
ORIGINAL_MODEL = "original"


@dataclass(frozen=True)
class OnlineConfig:
    s: int = 4
    fuse_original: bool = False
    softmax_temperature: float = 1.0
    bm25: Bm25Params = Bm25Params()
    rm3: Rm3Params | None = Rm3Params()
    hits: int = 1000

    def __post_init__(self) -> None:
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if not self.softmax_temperature > 0:
            raise ValueError("softmax temperature must be > 0")
        if self.hits < 1:
            raise ValueError("hits must be >= 1")


@dataclass(frozen=True)
class Column:
    """Scores of one (pseudo-query, model) pair over part of the candidates.

    ``rows`` index into ``CandidateSet.doc_ordinals``; candidates not listed
    are missing from this column.
    """

    selected: int
    model_id: str
    rows: np.ndarray
    raw: np.ndarray
    norm: np.ndarray | None = None


@dataclass(frozen=True)
class CandidateSet:
    doc_ordinals: np.ndarray
    selected: list[tuple[int, float]]
    columns: list[Column] = field(default_factory=list)

    @property
    def r(self) -> int:
        return len(self.doc_ordinals)

    @property
    def normalized(self) -> bool:
        return all(c.norm is not None for c in self.columns)

    def column(self, pq_id: int, model_id: str) -> Column:
        for c in self.columns:
            if self.selected[c.selected][0] == pq_id and c.model_id == model_id:
                return c
        raise KeyError((pq_id, model_id))

    def slot(self, ordinal: int, pq_id: int, model_id: str, normalized: bool = False) -> float | None:
        """Score of ``ordinal`` in one column, or None when missing."""
        col = self.column(pq_id, model_id)
        pos = int(np.searchsorted(self.doc_ordinals, ordinal))
        if pos >= self.r or self.doc_ordinals[pos] != ordinal:
            raise KeyError(f"document {ordinal} is not a candidate")
        hit = np.flatnonzero(col.rows == pos)
        if not len(hit):
            return None
        values = col.norm if normalized else col.raw
        return float(values[hit[0]])


def select_pseudo_queries(
    pq_index: InvertedIndex, query_text: str, s: int, bm25: Bm25Params = Bm25Params()
) -> list[tuple[int, float]]:
    if s < 1:
        raise ValueError("s must be >= 1")
    return bm25_search(pq_index, bm25, query_text, s).tolist()


def _union(parts: Sequence[np.ndarray]) -> np.ndarray:
    if not parts:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(parts).astype(np.int64))


def gather_candidates(store: ResultStore, selected: Sequence[tuple[int, float]]) -> CandidateSet:
    lists = []
    for i, (pq_id, _) in enumerate(selected):
        if not 0 <= pq_id < store.n_pq:
            raise KeyError(f"pseudo-query {pq_id} is not in the store")
        for mid in store.model_ids:
            lists.append((i, mid, store.get(pq_id, mid)))
    ordinals = _union([h.ordinals for _, _, h in lists])
    columns = [
        Column(i, mid, np.searchsorted(ordinals, h.ordinals.astype(np.int64)), h.scores.astype(np.float64))
        for i, mid, h in lists
    ]
    return CandidateSet(ordinals, list(selected), columns)


def normalize_minmax(cands: CandidateSet) -> CandidateSet:
    """Min-max scale every column over the candidates present in it.

    A column whose scores are all equal maps to 1.0.
    """
    columns = []
    for c in cands.columns:
        if len(c.raw) == 0:
            norm = np.empty(0)
        else:
            lo, hi = c.raw.min(), c.raw.max()
            norm = np.ones(len(c.raw)) if hi == lo else (c.raw - lo) / (hi - lo)
        columns.append(replace(c, norm=norm))
    return replace(cands, columns=columns)


def softmax_weights(scores: Sequence[float], temperature: float = 1.0) -> np.ndarray:
    z = np.asarray(scores, dtype=np.float64) / temperature
    if len(z) == 0:
        return z
    e = np.exp(z - z.max())
    return e / e.sum()


def aggregate(cands: CandidateSet, temperature: float = 1.0) -> Hits:
    """Softmax-weighted sum of normalized columns; missing slots add 0.

    The same pseudo-query weight applies to every model's column.
    """
    if not cands.normalized:
        raise ValueError("normalize_minmax must be applied before aggregate")
    if cands.r == 0:
        return Hits.empty()
    weights = softmax_weights([score for _, score in cands.selected], temperature)
    final = np.zeros(cands.r, dtype=np.float64)
    for c in cands.columns:
        final[c.rows] += weights[c.selected] * c.norm
    return top_k(final, cands.r, cands.doc_ordinals)


def sparse_run(doc_index: InvertedIndex, query_text: str, k: int, cfg: OnlineConfig) -> Hits:
    if cfg.rm3 is None:
        return bm25_search(doc_index, cfg.bm25, query_text, k)
    weights = rm3_expand(doc_index, cfg.rm3, cfg.bm25, query_text)
    return weighted_search(doc_index, cfg.bm25, weights, k) if weights else Hits.empty()


def fuse_original(
    cands: CandidateSet, doc_index: InvertedIndex, query_text: str, cfg: OnlineConfig, k: int = 1000
) -> CandidateSet:
    """Add the user query as a virtual pseudo-query backed by a sparse run.

    Its similarity is the best pseudo-query match score (1.0 when nothing
    matched); its retrieved scores form one extra column.
    """
    hits = sparse_run(doc_index, query_text, k, cfg)
    sim = max((score for _, score in cands.selected), default=1.0)
    ordinals = _union([cands.doc_ordinals, hits.ordinals])
    remap = np.searchsorted(ordinals, cands.doc_ordinals)
    columns = [replace(c, rows=remap[c.rows]) for c in cands.columns]
    selected = list(cands.selected) + [(ORIGINAL_QUERY, sim)]
    columns.append(
        Column(len(selected) - 1, ORIGINAL_MODEL, np.searchsorted(ordinals, hits.ordinals.astype(np.int64)),
               hits.scores.astype(np.float64))
    )
    return CandidateSet(ordinals, selected, columns)


@dataclass(frozen=True)
class Timing:
    match_us: float = 0.0
    gather_us: float = 0.0
    aggregate_us: float = 0.0
    sparse_us: float = 0.0
    total_us: float = 0.0


@dataclass(frozen=True)
class SearchResult:
    hits: list[tuple[str, float]]
    timing: Timing
    selected: list[tuple[int, float]]
    r: int
    warning: str | None = None


class SearchEngine:
    """Loaded online assets: result store, pseudo-query index, optional
    document index for fusing the original query."""

    def __init__(self, store: ResultStore, pq_index: InvertedIndex, doc_index: InvertedIndex | None = None) -> None:
        if pq_index.N != store.n_pq:
            raise ValueError(f"pseudo-query index has {pq_index.N} items, store has {store.n_pq}")
        if doc_index is not None and doc_index.N != len(store.doc_ids):
            raise ValueError(f"document index has {doc_index.N} items, store has {len(store.doc_ids)}")
        self.store = store
        self.pq_index = pq_index
        self.doc_index = doc_index

    def search(self, query_text: str, cfg: OnlineConfig = OnlineConfig()) -> SearchResult:
        return search(self, query_text, cfg)


def _us(t0: int, t1: int) -> float:
    return (t1 - t0) / 1000.0


def search(engine: SearchEngine, query_text: str, cfg: OnlineConfig = OnlineConfig()) -> SearchResult:
    t0 = time.perf_counter_ns()
    selected = select_pseudo_queries(engine.pq_index, query_text, cfg.s, cfg.bm25)
    t1 = time.perf_counter_ns()
    cands = gather_candidates(engine.store, selected)
    t2 = time.perf_counter_ns()
    if cfg.fuse_original:
        if engine.doc_index is None:
            raise ValueError("fuse_original needs a document index")
        cands = fuse_original(cands, engine.doc_index, query_text, cfg, engine.store.k)
    t3 = time.perf_counter_ns()
    ranked = aggregate(normalize_minmax(cands), cfg.softmax_temperature)
    doc_ids = engine.store.doc_ids
    hits = [(doc_ids[o], s) for o, s in zip(ranked.ordinals[: cfg.hits].tolist(), ranked.scores[: cfg.hits].tolist())]
    t4 = time.perf_counter_ns()

    warning = None
    if not hits:
        warning = "no pseudo-query matched" if not selected else "no candidates"
        log.warning("query %r: %s", query_text, warning)
    timing = Timing(_us(t0, t1), _us(t1, t2), _us(t3, t4), _us(t2, t3), _us(t0, t4))
    return SearchResult(hits, timing, selected, cands.r, warning)


def run_topics(
    engine: SearchEngine, topics: Iterable[Topic], cfg: OnlineConfig = OnlineConfig(), tag: str = "oprf"
) -> tuple[RunFile, dict[str, Timing]]:
    scored, timings = {}, {}
    for topic in topics:
        result = search(engine, topic.text, cfg)
        scored[topic.qid] = result.hits
        timings[topic.qid] = result.timing
    return RunFile.from_scored(scored, tag), timings


TIMING_COLUMNS = ("qid", "match_us", "gather_us", "aggregate_us", "sparse_us", "total_us")


def write_timings(path: str | Path, timings: dict[str, Timing]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TIMING_COLUMNS)
        for qid, t in timings.items():
            w.writerow([qid, f"{t.match_us:.1f}", f"{t.gather_us:.1f}", f"{t.aggregate_us:.1f}",
                        f"{t.sparse_us:.1f}", f"{t.total_us:.1f}"])
