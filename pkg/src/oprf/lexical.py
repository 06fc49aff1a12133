"""Tokenization, inverted index, BM25 and RM3.

The BM25 variant is the Lucene one: idf = ln(1 + (N - df + 0.5) / (df + 0.5))
with k1=0.9, b=0.4 defaults.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import struct
import threading
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import snowballstemmer

from ._binio import Reader
from .ranking import Hits, top_k

# Lucene's classic English stop set.
ENGLISH_STOPWORDS = frozenset(
    """a an and are as at be but by for if in into is it no not of on or such
    that the their then there these they this to was will with""".split()
)

_TOKEN = re.compile(r"[^\W_]+")
_stemmers = threading.local()


@lru_cache(maxsize=1 << 18)
def porter_stem(word: str) -> str:
    # snowball stemmer objects keep per-call state; one per thread
    stemmer = getattr(_stemmers, "porter", None)
    if stemmer is None:
        stemmer = _stemmers.porter = snowballstemmer.stemmer("porter")
    return stemmer.stemWord(word)


@dataclass(frozen=True)
class Tokenizer:
    lowercase: bool = True
    stopwords: frozenset[str] = ENGLISH_STOPWORDS
    stemmer: str = "porter"

    def __post_init__(self) -> None:
        if self.stemmer not in {"porter", "none"}:
            raise ValueError(f"unknown stemmer {self.stemmer!r}")

    def tokenize(self, text: str) -> list[str]:
        if self.lowercase:
            text = text.lower()
        tokens = [t for t in _TOKEN.findall(text) if t not in self.stopwords]
        if self.stemmer == "porter":
            tokens = [porter_stem(t) for t in tokens]
        return [t for t in tokens if t]

    def to_dict(self) -> dict:
        return {"lowercase": self.lowercase, "stemmer": self.stemmer, "stopwords": sorted(self.stopwords)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Tokenizer":
        return cls(bool(d["lowercase"]), frozenset(d["stopwords"]), str(d["stemmer"]))


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if not self.k1 > 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


@dataclass(frozen=True)
class Rm3Params:
    fb_docs: int = 10
    fb_terms: int = 10
    orig_weight: float = 0.5

    def __post_init__(self) -> None:
        if self.fb_docs < 0 or self.fb_terms < 0:
            raise ValueError("fb_docs and fb_terms must be >= 0")
        if not 0.0 <= self.orig_weight <= 1.0:
            raise ValueError("orig_weight must be in [0, 1]")


@dataclass(eq=False)
class InvertedIndex:
    """Immutable postings over items 0..N-1.

    ``postings[term]`` is ``(ordinals, tfs)``, both uint32 and sorted by
    ordinal.
    """

    postings: dict[str, tuple[np.ndarray, np.ndarray]]
    doc_lengths: np.ndarray
    tokenizer: Tokenizer = field(default_factory=Tokenizer)

    def __post_init__(self) -> None:
        self.N = len(self.doc_lengths)
        self.avg_doc_length = float(self.doc_lengths.mean()) if self.N else 0.0
        self._norm_cache: dict[tuple[float, float], np.ndarray] = {}
        self._forward: list[dict[str, int]] | None = None
        self._lock = threading.Lock()

    def df(self, term: str) -> int:
        p = self.postings.get(term)
        return 0 if p is None else len(p[0])

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))

    def tf(self, term: str, ordinal: int) -> int:
        p = self.postings.get(term)
        if p is None:
            return 0
        ords, tfs = p
        i = int(np.searchsorted(ords, ordinal))
        return int(tfs[i]) if i < len(ords) and ords[i] == ordinal else 0

    def length_norm(self, params: Bm25Params) -> np.ndarray:
        """Per-item ``k1 * (1 - b + b * len / avglen)``."""
        key = (params.k1, params.b)
        norm = self._norm_cache.get(key)
        if norm is None:
            if self.avg_doc_length > 0:
                rel = self.doc_lengths / self.avg_doc_length
            else:
                rel = np.ones(self.N)
            norm = params.k1 * (1.0 - params.b + params.b * rel)
            self._norm_cache[key] = norm
        return norm

    def item_terms(self, ordinal: int) -> dict[str, int]:
        """Term frequencies of one item, rebuilt lazily from the postings."""
        with self._lock:
            if self._forward is None:
                forward: list[dict[str, int]] = [{} for _ in range(self.N)]
                for term in sorted(self.postings):
                    ords, tfs = self.postings[term]
                    for o, t in zip(ords.tolist(), tfs.tolist()):
                        forward[o][term] = t
                self._forward = forward
        return self._forward[ordinal]

    def digest(self) -> str:
        return hashlib.sha256(index_to_bytes(self)).hexdigest()


def build_index(items: Iterable[tuple[int, str]], tokenizer: Tokenizer | None = None) -> InvertedIndex:
    tokenizer = tokenizer or Tokenizer()
    items = sorted(items, key=lambda it: it[0])
    if [o for o, _ in items] != list(range(len(items))):
        raise ValueError("item ordinals must be exactly 0..N-1")
    acc: dict[str, tuple[list[int], list[int]]] = {}
    lengths = np.zeros(len(items), dtype=np.int64)
    for ordinal, text in items:
        counts = Counter(tokenizer.tokenize(text))
        lengths[ordinal] = sum(counts.values())
        for term, tf in counts.items():
            ords, tfs = acc.setdefault(term, ([], []))
            ords.append(ordinal)
            tfs.append(tf)
    postings = {
        term: (np.asarray(o, dtype=np.uint32), np.asarray(t, dtype=np.uint32))
        for term, (o, t) in sorted(acc.items())
    }
    return InvertedIndex(postings, lengths, tokenizer)


def bm25_score(index: InvertedIndex, params: Bm25Params, query_tokens: Sequence[str], item_ordinal: int) -> float:
    if not 0 <= item_ordinal < index.N:
        raise IndexError(f"item {item_ordinal} out of range for N={index.N}")
    norm = float(index.length_norm(params)[item_ordinal])
    score = 0.0
    for term in query_tokens:
        tf = index.tf(term, item_ordinal)
        if tf:
            score += index.idf(term) * tf * (params.k1 + 1.0) / (tf + norm)
    return score


def weighted_search(
    index: InvertedIndex, params: Bm25Params, weights: Mapping[str, float], top_n: int
) -> Hits:
    """BM25 where each query term's contribution is scaled by its weight.

    Only items with a positive score are returned.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    terms = [(t, w) for t, w in sorted(weights.items()) if w > 0 and t in index.postings]
    if not terms or index.N == 0:
        return Hits.empty()
    norm = index.length_norm(params)
    acc = np.zeros(index.N, dtype=np.float64)
    for term, w in terms:
        ords, tfs = index.postings[term]
        tf = tfs.astype(np.float64)
        acc[ords] += (w * index.idf(term) * (params.k1 + 1.0)) * tf / (tf + norm[ords])
    candidates = np.flatnonzero(acc > 0)
    return top_k(acc[candidates], top_n, candidates)


def bm25_search(index: InvertedIndex, params: Bm25Params, query_text: str, top_n: int) -> Hits:
    return weighted_search(index, params, Counter(index.tokenizer.tokenize(query_text)), top_n)


def rm3_expand(index: InvertedIndex, params: Rm3Params, bm25: Bm25Params, query_text: str) -> dict[str, float]:
    """Expand a query with an RM3 relevance model.

    Feedback items are weighted by a softmax over their BM25 scores; each
    contributes its maximum-likelihood term distribution. The top
    ``fb_terms`` terms are renormalized and interpolated with the original
    query distribution.
    """
    tokens = index.tokenizer.tokenize(query_text)
    if not tokens:
        return {}
    counts = Counter(tokens)
    original = {t: c / len(tokens) for t, c in sorted(counts.items())}
    if params.fb_docs == 0 or params.fb_terms == 0 or params.orig_weight == 1.0:
        return original

    hits = bm25_search(index, bm25, query_text, params.fb_docs) if index.N else Hits.empty()
    if len(hits) == 0:
        return original
    doc_weights = np.exp(hits.scores - hits.scores.max())
    doc_weights /= doc_weights.sum()

    relevance: dict[str, float] = {}
    for ordinal, w in zip(hits.ordinals.tolist(), doc_weights.tolist()):
        terms = index.item_terms(ordinal)
        length = sum(terms.values())
        if not length:
            continue
        for term, tf in terms.items():
            if term in index.tokenizer.stopwords:
                continue
            relevance[term] = relevance.get(term, 0.0) + w * tf / length
    kept = sorted(relevance.items(), key=lambda kv: (-kv[1], kv[0]))[: params.fb_terms]
    total = sum(v for _, v in kept)
    if total <= 0:
        return original

    alpha = params.orig_weight
    expanded: dict[str, float] = {}
    for term, p in original.items():
        expanded[term] = alpha * p
    for term, p in kept:
        expanded[term] = expanded.get(term, 0.0) + (1.0 - alpha) * p / total
    return {t: w for t, w in sorted(expanded.items()) if w > 0}


# --- persistence -----------------------------------------------------------

INDEX_MAGIC = b"OPRFLEX1"


def index_to_bytes(index: InvertedIndex) -> bytes:
    """Little-endian layout: magic, N u64, avg_len f64, tokenizer JSON,
    term count u64, then per term (len-prefixed UTF-8, df u32, delta-coded
    u32 ordinals, u32 tfs)."""
    out = bytearray(INDEX_MAGIC)
    out += struct.pack("<Qd", index.N, index.avg_doc_length)
    tok = json.dumps(index.tokenizer.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    out += struct.pack("<I", len(tok)) + tok
    out += struct.pack("<Q", len(index.postings))
    for term in sorted(index.postings):
        ords, tfs = index.postings[term]
        raw = term.encode("utf-8")
        out += struct.pack("<I", len(raw)) + raw + struct.pack("<I", len(ords))
        out += np.diff(ords, prepend=np.uint32(0)).astype("<u4").tobytes()
        out += tfs.astype("<u4").tobytes()
    return bytes(out)


def save_index(path: str | Path, index: InvertedIndex) -> None:
    Path(path).write_bytes(index_to_bytes(index))


def load_index(path: str | Path) -> InvertedIndex:
    r = Reader(Path(path).read_bytes(), str(path))
    if bytes(r.take(len(INDEX_MAGIC))) != INDEX_MAGIC:
        raise ValueError(f"{path}: not an index file (bad magic)")
    n, _avg = r.unpack("<Qd")
    tokenizer = Tokenizer.from_dict(json.loads(r.blob()))
    (n_terms,) = r.unpack("<Q")
    postings = {}
    lengths = np.zeros(n, dtype=np.int64)
    for _ in range(n_terms):
        term = r.blob().decode("utf-8")
        (df,) = r.unpack("<I")
        ords = np.cumsum(r.array("<u4", df), dtype=np.uint64).astype(np.uint32)
        tfs = r.array("<u4", df).astype(np.uint32)
        if df and int(ords[-1]) >= n:
            raise ValueError(f"{path}: posting for {term!r} exceeds N={n}")
        np.add.at(lengths, ords, tfs)
        postings[term] = (ords, tfs)
    r.finish()
    return InvertedIndex(postings, lengths, tokenizer)
