"""Top-k selection with the (score desc, ordinal asc) tie rule used everywhere."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Hits(NamedTuple):
    ordinals: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:  # type: ignore[override]
        return len(self.ordinals)

    def tolist(self) -> list[tuple[int, float]]:
        return [(int(o), float(s)) for o, s in zip(self.ordinals, self.scores)]

    @classmethod
    def empty(cls, dtype=np.float64) -> "Hits":
        return cls(np.empty(0, dtype=np.int64), np.empty(0, dtype=dtype))


def top_k(scores: np.ndarray, k: int, ordinals: np.ndarray | None = None) -> Hits:
    """Best ``k`` entries of ``scores`` sorted by score desc, then ordinal asc.

    ``ordinals`` labels each score; it defaults to the positions and must be
    unique. Ties straddling the cut are resolved by ordinal, not by
    partition order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if ordinals is None:
        ordinals = np.arange(len(scores), dtype=np.int64)
    n = len(scores)
    if n == 0:
        return Hits(ordinals[:0].astype(np.int64), scores[:0])
    if k < n:
        part = np.argpartition(-scores, k - 1)[:k]
        threshold = scores[part].min()
        pool = np.flatnonzero(scores >= threshold)
    else:
        pool = np.arange(n)
    order = pool[np.lexsort((ordinals[pool], -scores[pool]))][:k]
    return Hits(ordinals[order].astype(np.int64), scores[order])
