"""Effectiveness metrics, paired significance testing and latency summaries."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import betainc

from .corpus import Qrels, RunFile
from .online import TIMING_COLUMNS


@dataclass(frozen=True)
class MetricConfig:
    ndcg_cutoff: int = 10
    recall_cutoff: int = 1000
    map_cutoff: int = 1000
    # None: 2 when qrels are graded (max grade > 1), else 1
    binarization_threshold: int | None = None

    def __post_init__(self) -> None:
        if min(self.ndcg_cutoff, self.recall_cutoff, self.map_cutoff) < 1:
            raise ValueError("cutoffs must be >= 1")
        if self.binarization_threshold is not None and self.binarization_threshold < 1:
            raise ValueError("binarization threshold must be >= 1")

    def threshold(self, qrels: Qrels) -> int:
        if self.binarization_threshold is not None:
            return self.binarization_threshold
        return 2 if qrels.max_grade > 1 else 1


@dataclass(frozen=True)
class MetricResult:
    per_query: dict[str, float]
    mean: float


def _qids(run: RunFile, qrels: Qrels) -> list[str]:
    return sorted(set(run.results) | set(qrels.qids))


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return float(sum(values) / len(values)) if values else 0.0


def ndcg_at(run: RunFile, qrels: Qrels, cutoff: int = 10) -> MetricResult:
    """nDCG with gain 2^g - 1 and a log2(rank + 1) discount."""
    per_query = {}
    for qid in _qids(run, qrels):
        judged = qrels.judgments(qid)
        ideal_grades = sorted((g for g in judged.values() if g > 0), reverse=True)[:cutoff]
        idcg = sum((2**g - 1) / math.log2(i + 2) for i, g in enumerate(ideal_grades))
        if idcg == 0:
            per_query[qid] = 0.0
            continue
        dcg = sum(
            (2 ** judged.get(doc, 0) - 1) / math.log2(i + 2)
            for i, doc in enumerate(run.ranking(qid)[:cutoff])
        )
        per_query[qid] = dcg / idcg
    return MetricResult(per_query, _mean(per_query.values()))


def map_at(run: RunFile, qrels: Qrels, cutoff: int = 1000, threshold: int = 1) -> MetricResult:
    """Average precision over relevant ranks within ``cutoff``, divided by
    the total number of relevant documents."""
    per_query = {}
    for qid in _qids(run, qrels):
        relevant = {d for d, g in qrels.judgments(qid).items() if g >= threshold}
        if not relevant:
            per_query[qid] = 0.0
            continue
        found, total = 0, 0.0
        for rank, doc in enumerate(run.ranking(qid)[:cutoff], start=1):
            if doc in relevant:
                found += 1
                total += found / rank
        per_query[qid] = total / len(relevant)
    return MetricResult(per_query, _mean(per_query.values()))


def recall_at(run: RunFile, qrels: Qrels, cutoff: int = 1000, threshold: int = 1) -> MetricResult:
    """Queries without relevant documents are left out of the mean."""
    per_query = {}
    for qid in _qids(run, qrels):
        relevant = {d for d, g in qrels.judgments(qid).items() if g >= threshold}
        if not relevant:
            continue
        retrieved = set(run.ranking(qid)[:cutoff])
        per_query[qid] = len(relevant & retrieved) / len(relevant)
    return MetricResult(per_query, _mean(per_query.values()))


def metric_names(cfg: MetricConfig) -> dict[str, str]:
    return {"ndcg": f"ndcg@{cfg.ndcg_cutoff}", "map": "map", "recall": f"r@{_short(cfg.recall_cutoff)}"}


def _short(n: int) -> str:
    return f"{n // 1000}k" if n % 1000 == 0 else str(n)


def evaluate(run: RunFile, qrels: Qrels, cfg: MetricConfig = MetricConfig()) -> dict[str, MetricResult]:
    names = metric_names(cfg)
    thr = cfg.threshold(qrels)
    return {
        names["ndcg"]: ndcg_at(run, qrels, cfg.ndcg_cutoff),
        names["map"]: map_at(run, qrels, cfg.map_cutoff, thr),
        names["recall"]: recall_at(run, qrels, cfg.recall_cutoff, thr),
    }


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    n: int
    degenerate: bool = False


def paired_ttest(a: Mapping[str, float], b: Mapping[str, float]) -> TTestResult:
    """Two-tailed paired t-test on per-query values keyed by qid.

    No variance in the differences: p = 1 when they are all zero, otherwise
    p = 0 with ``degenerate`` set.
    """
    if set(a) != set(b):
        missing = sorted(set(a) ^ set(b))
        raise ValueError(f"per-query values cover different queries: {missing[:5]}")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 queries")
    d = np.array([a[q] - b[q] for q in sorted(a)], dtype=np.float64)
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0:
        if mean == 0:
            return TTestResult(0.0, 1.0, n)
        return TTestResult(math.copysign(math.inf, mean), 0.0, n, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    df = n - 1
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTestResult(float(t), p, n)


def read_timings(path: str | Path) -> dict[str, np.ndarray]:
    with Path(path).open(encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TIMING_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(TIMING_COLUMNS)}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no timing rows")
    return {col: np.array([float(r[col]) for r in rows]) for col in TIMING_COLUMNS[1:]}


def percentile(values: Sequence[float], q: float) -> float:
    return float(np.percentile(np.asarray(values, dtype=np.float64), q))


def latency_report(
    timings: Mapping[str, str | Path | Mapping[str, np.ndarray]], baseline: str | None = None
) -> dict[str, dict]:
    """Mean/p50/p95 per phase for each named timing table.

    ``multiple`` is this table's mean total over the baseline's mean total.
    """
    tables = {name: read_timings(t) if isinstance(t, (str, Path)) else t for name, t in timings.items()}
    if baseline is not None and baseline not in tables:
        raise KeyError(f"baseline {baseline!r} is not among {sorted(tables)}")
    report = {}
    for name, table in tables.items():
        if len(table["total_us"]) == 0:
            raise ValueError(f"{name}: no timing rows")
        summary = {
            phase: {"mean": float(np.mean(v)), "p50": percentile(v, 50), "p95": percentile(v, 95)}
            for phase, v in table.items()
        }
        if baseline is not None:
            summary["multiple"] = summary["total_us"]["mean"] / float(np.mean(tables[baseline]["total_us"]))
        report[name] = summary
    return report


def format_table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    cells = [[str(h) for h in header]] + [
        [f"{v:.4f}" if isinstance(v, float) else str(v) for v in row] for row in rows
    ]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(lines)
