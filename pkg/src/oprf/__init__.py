"""Single-pass retrieval: dense retrieval and PRF run offline over
pseudo-queries; online search is BM25 matching plus score aggregation."""

from .corpus import Corpus, Document, PseudoQuery, Qrels, RunFile, Topic
from .dense import EmbeddingMatrix, PrfConfig, dense_topk, hash_embed, prf_avg
from .lexical import Bm25Params, InvertedIndex, Rm3Params, Tokenizer, bm25_search, build_index
from .offline import ModelRegistry, OfflineConfig, ResultStore, ScoreModel, estimate_storage, prepare
from .online import OnlineConfig, SearchEngine, search

__all__ = [
    "Bm25Params",
    "Corpus",
    "Document",
    "EmbeddingMatrix",
    "InvertedIndex",
    "ModelRegistry",
    "OfflineConfig",
    "OnlineConfig",
    "PrfConfig",
    "PseudoQuery",
    "Qrels",
    "ResultStore",
    "Rm3Params",
    "RunFile",
    "ScoreModel",
    "SearchEngine",
    "Tokenizer",
    "Topic",
    "bm25_search",
    "build_index",
    "dense_topk",
    "estimate_storage",
    "hash_embed",
    "prepare",
    "prf_avg",
    "search",
]
