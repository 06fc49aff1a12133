"""Embedding matrices, exhaustive inner-product search and Avg vector PRF."""

from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._binio import Reader
from .lexical import Tokenizer
from .ranking import Hits, top_k

EMBEDDING_MAGIC = b"OPRFEMB1"


class EmptyTextWarning(UserWarning):
    """``hash_embed`` produced a zero vector because the text has no tokens."""


@dataclass(eq=False)
class EmbeddingMatrix:
    """``count x dim`` float32 vectors; row ``i`` belongs to ordinal ``i``."""

    vectors: np.ndarray

    def __post_init__(self) -> None:
        v = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError(f"expected a count x dim matrix with dim > 0, got shape {v.shape}")
        bad = np.flatnonzero(~np.isfinite(v).all(axis=1))
        if len(bad):
            raise ValueError(f"non-finite value in row {int(bad[0])}")
        v.setflags(write=False)
        self.vectors = v

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def digest(self) -> str:
        h = hashlib.sha256(struct.pack("<QI", self.count, self.dim))
        h.update(self.vectors.astype("<f4").tobytes())
        return h.hexdigest()


def save_embeddings(path: str | Path, emb: EmbeddingMatrix) -> None:
    record = np.dtype([("ordinal", "<u4"), ("vector", "<f4", (emb.dim,))])
    rows = np.empty(emb.count, dtype=record)
    rows["ordinal"] = np.arange(emb.count, dtype=np.uint32)
    rows["vector"] = emb.vectors
    with Path(path).open("wb") as f:
        f.write(EMBEDDING_MAGIC + struct.pack("<QI", emb.count, emb.dim))
        f.write(rows.tobytes())


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read ``OPRFEMB1``: header (count u64, dim u32) then (u32 ordinal, dim x f32) records."""
    r = Reader(Path(path).read_bytes(), str(path))
    if bytes(r.take(len(EMBEDDING_MAGIC))) != EMBEDDING_MAGIC:
        raise ValueError(f"{path}: not an embedding file (bad magic)")
    count, dim = r.unpack("<QI")
    if dim == 0:
        raise ValueError(f"{path}: dim must be > 0")
    record = np.dtype([("ordinal", "<u4"), ("vector", "<f4", (dim,))])
    expected = count * record.itemsize
    remaining = len(r.buf) - r.pos
    if remaining != expected:
        raise ValueError(
            f"{path}: dimension/count mismatch, header says {count} x {dim} "
            f"({expected} bytes) but {remaining} bytes follow"
        )
    rows = r.array(record, count)
    ordinals = rows["ordinal"].astype(np.int64)
    if count and not np.array_equal(np.sort(ordinals), np.arange(count)):
        raise ValueError(f"{path}: ordinals are not a permutation of 0..{count - 1}")
    vectors = np.empty((count, dim), dtype=np.float32)
    vectors[ordinals] = rows["vector"]
    bad = np.flatnonzero(~np.isfinite(rows["vector"]).all(axis=1))
    if len(bad):
        raise ValueError(f"{path}: non-finite value in row {int(bad[0])} (ordinal {int(ordinals[bad[0]])})")
    return EmbeddingMatrix(vectors)


def token_slot(token: str, dim: int) -> tuple[int, float]:
    """Position and sign a token contributes in ``hash_embed``."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16).digest()
    position = int.from_bytes(digest[:8], "little") % dim
    sign = 1.0 if digest[8] & 1 else -1.0
    return position, sign


def hash_embed(text: str, dim: int, tokenizer: Tokenizer | None = None) -> np.ndarray:
    """Deterministic feature-hashing embedder, L2-normalized.

    Stands in for a trained encoder in tests and synthetic fixtures. A text
    without tokens (or whose tokens cancel) yields a zero vector and an
    ``EmptyTextWarning``.
    """
    if dim < 1:
        raise ValueError("dim must be > 0")
    tokenizer = tokenizer or Tokenizer()
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenizer.tokenize(text):
        pos, sign = token_slot(token, dim)
        vec[pos] += sign
    norm = np.linalg.norm(vec)
    if norm == 0:
        warnings.warn(f"no usable tokens in {text!r}", EmptyTextWarning, stacklevel=2)
        return vec.astype(np.float32)
    return (vec / norm).astype(np.float32)


def embed_texts(texts, dim: int, tokenizer: Tokenizer | None = None) -> EmbeddingMatrix:
    tokenizer = tokenizer or Tokenizer()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyTextWarning)
        rows = [hash_embed(t, dim, tokenizer) for t in texts]
    return EmbeddingMatrix(np.vstack(rows) if rows else np.zeros((0, dim), dtype=np.float32))


@dataclass(frozen=True)
class PrfConfig:
    mode: str = "none"
    depth: int = 3

    def __post_init__(self) -> None:
        if self.mode not in {"none", "avg"}:
            raise ValueError(f"unknown PRF mode {self.mode!r}")
        if self.depth < 0:
            raise ValueError("PRF depth must be >= 0")


def _as_query(docs: EmbeddingMatrix, query_vec: np.ndarray) -> np.ndarray:
    q = np.asarray(query_vec, dtype=np.float32)
    if q.shape != (docs.dim,):
        raise ValueError(f"query dim {q.shape} does not match document dim {docs.dim}")
    return q


def dense_topk(docs: EmbeddingMatrix, query_vec: np.ndarray, k: int) -> Hits:
    """Exact inner-product top-k, sorted by score desc then ordinal asc."""
    q = _as_query(docs, query_vec)
    if k < 1:
        raise ValueError("k must be >= 1")
    return top_k(docs.vectors @ q, k)


def prf_avg(docs: EmbeddingMatrix, query_vec: np.ndarray, cfg: PrfConfig) -> np.ndarray:
    """Mean of the query vector and its top-``depth`` document vectors."""
    q = _as_query(docs, query_vec)
    if cfg.mode != "avg":
        raise ValueError("prf_avg requires mode='avg'")
    if cfg.depth == 0 or docs.count == 0:
        return q
    feedback = dense_topk(docs, q, cfg.depth).ordinals
    total = q.astype(np.float64) + docs.vectors[feedback].astype(np.float64).sum(axis=0)
    return (total / (len(feedback) + 1)).astype(np.float32)
