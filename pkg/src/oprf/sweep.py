"""Hyperparameter sweeps over s, stored-list depth and pseudo-queries per document."""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Qrels, Topic, normalize_query_text
from .evaluation import MetricConfig, evaluate, metric_names
from .lexical import InvertedIndex, build_index
from .offline import ResultStore
from .online import OnlineConfig, SearchEngine, run_topics

PARAMETERS = ("s", "k_truncation", "m_subset")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.parameter not in PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}; choose from {PARAMETERS}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        if self.values[0] < 1:
            raise ValueError("sweep values must be >= 1")


@dataclass
class SweepAssets:
    store: ResultStore
    pq_index: InvertedIndex
    topics: Sequence[Topic]
    qrels: Qrels
    online: OnlineConfig = OnlineConfig()
    metrics: MetricConfig = MetricConfig()
    doc_index: InvertedIndex | None = None
    # raw (doc_id, text) pseudo-query lines in file order; needed for m_subset
    pq_records: Sequence[tuple[str, str]] | None = None
    repetitions: int = 1
    # k_truncation only: build a store at each k instead of truncating
    reprepare: Callable[[int], ResultStore] | None = None


@dataclass(frozen=True)
class SweepRow:
    value: int
    metrics: dict[str, float] = field(default_factory=dict)
    mean_latency_us: float = 0.0


def m_subset_ids(store: ResultStore, pq_records: Sequence[tuple[str, str]], m: int) -> list[int]:
    """Store pq_ids left when each document keeps its first ``m`` pseudo-queries."""
    per_doc: dict[str, int] = {}
    for doc, _ in pq_records:
        per_doc[doc] = per_doc.get(doc, 0) + 1
    available = max(per_doc.values(), default=0)
    if m > available:
        raise ValueError(f"m_subset value {m} exceeds the {available} pseudo-queries available per document")
    lookup = {t: i for i, t in enumerate(store.pq_texts)}
    taken: dict[str, int] = {}
    ids: list[int] = []
    seen: set[int] = set()
    for doc, text in pq_records:
        if taken.get(doc, 0) >= m:
            continue
        taken[doc] = taken.get(doc, 0) + 1
        key = normalize_query_text(text)
        if not key:
            continue
        if key not in lookup:
            raise ValueError(f"pseudo-query {key!r} is not in the store")
        pq = lookup[key]
        if pq not in seen:
            seen.add(pq)
            ids.append(pq)
    return ids


def _engine_for(value: int, spec: SweepSpec, assets: SweepAssets) -> tuple[SearchEngine, OnlineConfig]:
    cfg = assets.online
    if spec.parameter == "s":
        return SearchEngine(assets.store, assets.pq_index, assets.doc_index), replace(cfg, s=value)
    if spec.parameter == "k_truncation":
        if assets.reprepare is not None:
            return SearchEngine(assets.reprepare(value), assets.pq_index, assets.doc_index), cfg
        if value > assets.store.k:
            raise ValueError(f"k_truncation value {value} exceeds stored k={assets.store.k}")
        store = assets.store if value == assets.store.k else assets.store.truncate(value)
        return SearchEngine(store, assets.pq_index, assets.doc_index), cfg
    if assets.pq_records is None:
        raise ValueError("m_subset sweeps need the pseudo-query records")
    ids = m_subset_ids(assets.store, assets.pq_records, value)
    if ids == list(range(assets.store.n_pq)):
        return SearchEngine(assets.store, assets.pq_index, assets.doc_index), cfg
    store = assets.store.subset(ids)
    pq_index = build_index(enumerate(store.pq_texts), assets.pq_index.tokenizer)
    return SearchEngine(store, pq_index, assets.doc_index), cfg


def run_sweep(spec: SweepSpec, assets: SweepAssets) -> list[SweepRow]:
    """Evaluate every value over the full topic set, one point at a time.

    Latency is the mean per-query total after one warm-up pass; with several
    repetitions the median of the repetition means is reported.
    """
    rows = []
    names = metric_names(assets.metrics)
    for value in spec.values:
        engine, cfg = _engine_for(value, spec, assets)
        # untimed pass fills lazy caches so the first sweep point is not penalized
        run, _ = run_topics(engine, assets.topics, cfg)
        means = []
        for _ in range(max(1, assets.repetitions)):
            _, timings = run_topics(engine, assets.topics, cfg)
            means.append(float(np.mean([t.total_us for t in timings.values()])) if timings else 0.0)
        results = evaluate(run, assets.qrels, assets.metrics)
        metrics = {key: results[key].mean for key in names.values()}
        rows.append(SweepRow(value, metrics, statistics.median(means)))
    return rows


def write_sweep_csv(path: str | Path, parameter: str, rows: Sequence[SweepRow]) -> None:
    metric_keys = list(rows[0].metrics) if rows else []
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([parameter, *metric_keys, "mean_latency_us"])
        for row in rows:
            w.writerow([row.value, *(f"{row.metrics[k]:.6f}" for k in metric_keys), f"{row.mean_latency_us:.1f}"])
