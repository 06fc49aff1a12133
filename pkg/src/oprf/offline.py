"""Offline preparation: top-k lists for every pseudo-query under every model."""

from __future__ import annotations

import hashlib
import json
import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from decimal import ROUND_HALF_UP, Decimal
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._binio import Reader
from .corpus import PseudoQuery
from .dense import EmbeddingMatrix, PrfConfig, dense_topk, hash_embed, prf_avg
from .lexical import Bm25Params, InvertedIndex, Tokenizer, bm25_search
from .ranking import Hits

log = logging.getLogger(__name__)

STORE_MAGIC = b"OPRFSTO1"
STORE_FORMAT = 1


@dataclass(frozen=True)
class ScoreModel:
    """One score provider.

    Dense models need document vectors; pseudo-query vectors come from
    ``query_vectors`` (row = pq_id) or, when absent, from ``hash_embed``.
    Lexical models score pseudo-queries with BM25 over ``index``.
    """

    model_id: str
    kind: str
    docs: EmbeddingMatrix | None = None
    query_vectors: EmbeddingMatrix | None = None
    index: InvertedIndex | None = None
    prf: PrfConfig = PrfConfig()
    bm25: Bm25Params = Bm25Params()
    tokenizer: Tokenizer = field(default_factory=Tokenizer)

    def __post_init__(self) -> None:
        if not self.model_id or any(c.isspace() or c in ",:=" for c in self.model_id):
            raise ValueError(f"invalid model id {self.model_id!r}")
        if self.kind == "dense":
            if self.docs is None:
                raise ValueError(f"dense model {self.model_id!r} needs document embeddings")
            if self.query_vectors is not None and self.query_vectors.dim != self.docs.dim:
                raise ValueError(f"model {self.model_id!r}: query/document dims differ")
        elif self.kind == "lexical":
            if self.index is None:
                raise ValueError(f"lexical model {self.model_id!r} needs an index")
            if self.prf.mode != "none":
                raise ValueError(f"lexical model {self.model_id!r} does not support vector PRF")
        else:
            raise ValueError(f"unknown model kind {self.kind!r}")

    @property
    def n_docs(self) -> int:
        return self.docs.count if self.kind == "dense" else self.index.N

    def manifest(self) -> dict:
        entry = {"id": self.model_id, "kind": self.kind, "prf": {"mode": self.prf.mode, "depth": self.prf.depth}}
        if self.kind == "lexical":
            entry["bm25"] = {"k1": self.bm25.k1, "b": self.bm25.b}
        return entry

    def resource_digest(self) -> str:
        if self.kind == "lexical":
            return self.index.digest()
        h = hashlib.sha256(self.docs.digest().encode())
        h.update(self.query_vectors.digest().encode() if self.query_vectors else b"hash_embed")
        h.update(json.dumps(self.tokenizer.to_dict(), sort_keys=True).encode())
        return h.hexdigest()

    def retrieve(self, pq: PseudoQuery, k: int) -> Hits:
        if self.kind == "lexical":
            return bm25_search(self.index, self.bm25, pq.text, k)
        if self.query_vectors is not None:
            if pq.pq_id >= self.query_vectors.count:
                raise KeyError(f"model {self.model_id!r} has no embedding for pseudo-query {pq.pq_id}")
            q = self.query_vectors.vectors[pq.pq_id]
        else:
            q = hash_embed(pq.text, self.docs.dim, self.tokenizer)
        if self.prf.mode == "avg":
            q = prf_avg(self.docs, q, self.prf)
        return dense_topk(self.docs, q, k)


class ModelRegistry:
    def __init__(self, models: Iterable[ScoreModel]) -> None:
        self.models = tuple(models)
        if not self.models:
            raise ValueError("registry needs at least one model")
        ids = [m.model_id for m in self.models]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate model ids in {ids}")
        sizes = {m.n_docs for m in self.models}
        if len(sizes) != 1:
            raise ValueError(f"models disagree on corpus size: {sorted(sizes)}")

    def __iter__(self):
        return iter(self.models)

    def __len__(self) -> int:
        return len(self.models)

    @property
    def n_docs(self) -> int:
        return self.models[0].n_docs


@dataclass(frozen=True)
class OfflineConfig:
    k: int = 1000
    m: int = 80

    def __post_init__(self) -> None:
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be >= 1")


@dataclass(eq=False)
class _Lists:
    """CSR-style concatenation of one model's lists, indexed by pq_id."""

    offsets: np.ndarray
    ordinals: np.ndarray
    scores: np.ndarray

    @classmethod
    def from_hits(cls, hits: Sequence[Hits]) -> "_Lists":
        lengths = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(hits))
        offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        if hits:
            ordinals = np.concatenate([h.ordinals for h in hits]).astype(np.uint32)
            scores = np.concatenate([h.scores for h in hits]).astype(np.float32)
        else:
            ordinals, scores = np.empty(0, np.uint32), np.empty(0, np.float32)
        return cls(offsets, ordinals, scores)

    def get(self, i: int) -> Hits:
        a, b = self.offsets[i], self.offsets[i + 1]
        return Hits(self.ordinals[a:b], self.scores[a:b])


@dataclass(eq=False)
class ResultStore:
    """The offline artifact: for each (pseudo-query, model) a sorted top-k list
    of (document ordinal, raw float32 score)."""

    k: int
    m: int
    models: list[dict]
    pq_texts: list[str]
    doc_ids: list[str]
    lists: dict[str, _Lists]
    build_hash: str = ""
    build_stats: dict = field(default_factory=dict)

    @classmethod
    def from_lists(cls, lists: dict[str, Sequence[Hits]], pq_texts: Sequence[str], doc_ids: Sequence[str],
                   k: int) -> "ResultStore":
        """Store over ready-made lists; each ``lists[model]`` is indexed by pq_id."""
        for mid, hits in lists.items():
            if len(hits) != len(pq_texts):
                raise ValueError(f"model {mid!r} has {len(hits)} lists for {len(pq_texts)} pseudo-queries")
        models = [{"id": mid, "kind": "external", "prf": {"mode": "none", "depth": 0}} for mid in lists]
        return cls(k, 1, models, list(pq_texts), list(doc_ids),
                   {mid: _Lists.from_hits(list(h)) for mid, h in lists.items()})

    @property
    def model_ids(self) -> list[str]:
        return [m["id"] for m in self.models]

    @property
    def n_pq(self) -> int:
        return len(self.pq_texts)

    def get(self, pq_id: int, model_id: str) -> Hits:
        if not 0 <= pq_id < self.n_pq:
            raise KeyError(f"unknown pseudo-query id {pq_id}")
        return self.lists[model_id].get(pq_id)

    def manifest(self) -> dict:
        return {"format": STORE_FORMAT, "k": self.k, "m": self.m, "models": self.models, "build_hash": self.build_hash}

    def truncate(self, k: int) -> "ResultStore":
        """View with every list cut to its first ``k`` entries."""
        if not 1 <= k <= self.k:
            raise ValueError(f"truncation depth {k} must be in 1..{self.k}")
        lists = {}
        for mid, l in self.lists.items():
            lists[mid] = _Lists.from_hits([Hits(h.ordinals[:k], h.scores[:k]) for h in map(l.get, range(self.n_pq))])
        return ResultStore(k, self.m, self.models, self.pq_texts, self.doc_ids, lists,
                           f"{self.build_hash}/k={k}")

    def subset(self, pq_ids: Sequence[int]) -> "ResultStore":
        """Store restricted to ``pq_ids``, relabelled 0..len-1 in the given order."""
        lists = {mid: _Lists.from_hits([l.get(i) for i in pq_ids]) for mid, l in self.lists.items()}
        texts = [self.pq_texts[i] for i in pq_ids]
        digest = hashlib.sha256(np.asarray(pq_ids, dtype="<i8").tobytes()).hexdigest()[:16]
        return ResultStore(self.k, self.m, self.models, texts, self.doc_ids, lists,
                           f"{self.build_hash}/subset={digest}")

    def same_content(self, other: "ResultStore") -> bool:
        if (self.manifest(), self.pq_texts, self.doc_ids) != (other.manifest(), other.pq_texts, other.doc_ids):
            return False
        for mid, a in self.lists.items():
            b = other.lists[mid]
            if not (np.array_equal(a.offsets, b.offsets) and np.array_equal(a.ordinals, b.ordinals)
                    and a.scores.tobytes() == b.scores.tobytes()):
                return False
        return True


def _build_hash(pseudo_queries: Sequence[PseudoQuery], registry: ModelRegistry, cfg: OfflineConfig,
                doc_ids: Sequence[str]) -> str:
    h = hashlib.sha256()
    h.update(json.dumps({"k": cfg.k, "m": cfg.m, "format": STORE_FORMAT}, sort_keys=True).encode())
    for model in registry:
        h.update(json.dumps(model.manifest(), sort_keys=True).encode())
        h.update(model.resource_digest().encode())
    for doc in doc_ids:
        h.update(doc.encode() + b"\0")
    for pq in pseudo_queries:
        h.update(pq.text.encode() + b"\0")
    return h.hexdigest()


def prepare(
    pseudo_queries: Sequence[PseudoQuery],
    registry: ModelRegistry,
    cfg: OfflineConfig,
    *,
    doc_ids: Sequence[str],
    workers: int = 1,
) -> ResultStore:
    """Compute and collect the stored lists.

    Pseudo-queries are split into ``workers`` contiguous shards; every list
    depends only on its own pseudo-query, so the merged store is identical
    for any worker count.
    """
    if [pq.pq_id for pq in pseudo_queries] != list(range(len(pseudo_queries))):
        raise ValueError("pseudo-query ids must be 0..n-1 in order")
    if registry.n_docs != len(doc_ids):
        raise ValueError(f"registry covers {registry.n_docs} documents but {len(doc_ids)} ids were given")
    for model in registry:
        qv = model.query_vectors
        if qv is not None and qv.count < len(pseudo_queries):
            raise KeyError(
                f"model {model.model_id!r} has no embedding for pseudo-query {qv.count} "
                f"({qv.count} vectors for {len(pseudo_queries)} pseudo-queries)"
            )
    workers = max(1, int(workers))
    n = len(pseudo_queries)
    bounds = np.linspace(0, n, workers + 1).astype(int)

    def run_shard(lo: int, hi: int) -> dict[str, list[Hits]]:
        return {m.model_id: [m.retrieve(pq, cfg.k) for pq in pseudo_queries[lo:hi]] for m in registry}

    start = time.perf_counter()
    if workers == 1:
        shards = [run_shard(0, n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            shards = list(pool.map(run_shard, bounds[:-1], bounds[1:]))
    elapsed = time.perf_counter() - start

    lists = {
        m.model_id: _Lists.from_hits([h for shard in shards for h in shard[m.model_id]])
        for m in registry
    }
    store = ResultStore(
        k=cfg.k,
        m=cfg.m,
        models=[m.manifest() for m in registry],
        pq_texts=[pq.text for pq in pseudo_queries],
        doc_ids=list(doc_ids),
        lists=lists,
        build_hash=_build_hash(pseudo_queries, registry, cfg, doc_ids),
        build_stats={"seconds": elapsed, "seconds_per_pq": elapsed / n if n else 0.0, "workers": workers},
    )
    log.info("prepared %d pseudo-queries x %d models in %.2fs", n, len(registry), elapsed)
    return store


def _blob(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


def store_to_bytes(store: ResultStore) -> bytes:
    """``OPRFSTO1`` layout, little-endian: manifest JSON, document ids,
    pseudo-query texts, then for each pq and each model (manifest order) a
    u32 length followed by u32 ordinals and f32 scores."""
    out = bytearray(STORE_MAGIC)
    out += _blob(json.dumps(store.manifest(), sort_keys=True, separators=(",", ":")).encode())
    out += struct.pack("<Q", len(store.doc_ids))
    for d in store.doc_ids:
        out += _blob(d.encode("utf-8"))
    out += struct.pack("<Q", store.n_pq)
    for t in store.pq_texts:
        out += _blob(t.encode("utf-8"))
    for i in range(store.n_pq):
        for mid in store.model_ids:
            h = store.lists[mid].get(i)
            out += struct.pack("<I", len(h))
            out += h.ordinals.astype("<u4").tobytes()
            out += h.scores.astype("<f4").tobytes()
    return bytes(out)


def save_store(path: str | Path, store: ResultStore) -> None:
    Path(path).write_bytes(store_to_bytes(store))


def load_store(path: str | Path) -> ResultStore:
    r = Reader(Path(path).read_bytes(), str(path))
    if bytes(r.take(len(STORE_MAGIC))) != STORE_MAGIC:
        raise ValueError(f"{path}: not a result store (bad magic)")
    manifest = json.loads(r.blob())
    if manifest.get("format") != STORE_FORMAT:
        raise ValueError(f"{path}: unsupported store format {manifest.get('format')!r}")
    (n_docs,) = r.unpack("<Q")
    doc_ids = [r.blob().decode("utf-8") for _ in range(n_docs)]
    (n_pq,) = r.unpack("<Q")
    pq_texts = [r.blob().decode("utf-8") for _ in range(n_pq)]
    model_ids = [m["id"] for m in manifest["models"]]
    collected: dict[str, list[Hits]] = {mid: [] for mid in model_ids}
    for _ in range(n_pq):
        for mid in model_ids:
            (length,) = r.unpack("<I")
            ords = r.array("<u4", length)
            scores = r.array("<f4", length)
            if length and int(ords.max()) >= n_docs:
                raise ValueError(f"{path}: document ordinal out of range")
            collected[mid].append(Hits(ords, scores))
    r.finish()
    lists = {mid: _Lists.from_hits(h) for mid, h in collected.items()}
    return ResultStore(manifest["k"], manifest["m"], manifest["models"], pq_texts, doc_ids, lists,
                       manifest["build_hash"])


def estimate_storage(pq_per_doc: float, avg_pq_chars: float, k: int, score_bytes: int, id_bytes: int) -> float:
    """Bytes per document: each retained pseudo-query stores its text plus
    ``k`` (score, id) pairs."""
    if min(pq_per_doc, avg_pq_chars, k, score_bytes, id_bytes) < 0:
        raise ValueError("storage inputs must be >= 0")
    return pq_per_doc * (avg_pq_chars + k * (score_bytes + id_bytes))


def round_half_up(value: float) -> int:
    """Nearest integer with .5 rounding away from zero, on the shortest decimal repr."""
    return int(Decimal(repr(value)).quantize(Decimal(1), rounding=ROUND_HALF_UP))
