"""Relational temporal graph over the T frames of a clip.

Node indices are 1-based, as in the neighbour-set definitions.  Each
relation maps a target node ``i`` to the ascending list of source nodes
whose features flow into ``i``:

* ``intra_past``   max(1, i-P) <= j < i
* ``intra_future`` i < j <= min(T, i+F)
* ``inter_past``   max(1, i-dmax) <= j <= i-dmin
* ``inter_next``   i+dmin <= j <= min(T, i+dmax)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

log = logging.getLogger(__name__)

RELATIONS = ("intra_past", "intra_future", "inter_past", "inter_next")
REFERENCE_FPS = 30.0


def _check(T: int, P: int, F: int, delta_min: int, delta_max: int) -> None:
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if P < 0 or F < 0:
        raise ValueError(f"context windows must be non-negative, got P={P}, F={F}")
    if delta_min < 1:
        raise ValueError(f"delta_min must be >= 1, got {delta_min}")
    if delta_min > delta_max:
        raise ValueError(f"delta_min {delta_min} > delta_max {delta_max}")


@dataclass(frozen=True)
class RelGraph:
    T: int
    P: int
    F: int
    delta_min: int
    delta_max: int
    neighbors: dict   # relation -> tuple of T tuples (1-based source indices)

    def sources(self, relation: str, i: int) -> tuple:
        return self.neighbors[relation][i - 1]

    def union(self, i: int) -> tuple:
        return tuple(sorted(set().union(*(self.sources(r, i) for r in RELATIONS))))

    def edges(self):
        """Yield ``(target, source, relation)`` triples, 1-based."""
        for i in range(1, self.T + 1):
            for r in RELATIONS:
                for j in self.sources(r, i):
                    yield i, j, r

    @cached_property
    def mean_adjacency(self) -> dict[str, np.ndarray]:
        """Row-normalized 0-based ``[T, T]`` matrices; empty rows stay zero."""
        out = {}
        for r in RELATIONS:
            A = np.zeros((self.T, self.T))
            for i, src in enumerate(self.neighbors[r]):
                if src:
                    A[i, np.asarray(src) - 1] = 1.0 / len(src)
            out[r] = A
        return out

    @cached_property
    def union_mask(self) -> np.ndarray:
        """Boolean ``[T, T]``; entry (i, j) is set when j is any-relation neighbour of i."""
        M = np.zeros((self.T, self.T), dtype=bool)
        for i, j, _ in self.edges():
            M[i - 1, j - 1] = True
        return M

    def __eq__(self, other):
        if not isinstance(other, RelGraph):
            return NotImplemented
        return ((self.T, self.P, self.F, self.delta_min, self.delta_max)
                == (other.T, other.P, other.F, other.delta_min, other.delta_max)
                and all(self.neighbors[r] == other.neighbors[r] for r in RELATIONS))

    __hash__ = None


def build_graph(T: int, P: int, F: int, delta_min: int, delta_max: int) -> RelGraph:
    _check(T, P, F, delta_min, delta_max)
    nb = {r: [] for r in RELATIONS}
    for i in range(1, T + 1):
        nb["intra_past"].append(tuple(range(max(1, i - P), i)))
        nb["intra_future"].append(tuple(range(i + 1, min(T, i + F) + 1)))
        nb["inter_past"].append(tuple(range(max(1, i - delta_max), i - delta_min + 1)))
        nb["inter_next"].append(tuple(range(i + delta_min, min(T, i + delta_max) + 1)))
    return RelGraph(T, P, F, delta_min, delta_max, {r: tuple(v) for r, v in nb.items()})


def brute_force_graph(T: int, P: int, F: int, delta_min: int, delta_max: int) -> RelGraph:
    """Pairwise membership test of every (i, j); test oracle for ``build_graph``."""
    _check(T, P, F, delta_min, delta_max)
    if T > 512:
        raise ValueError("brute-force oracle limited to T <= 512")
    preds = {
        "intra_past": lambda i, j: j < i and i - j <= P,
        "intra_future": lambda i, j: j > i and j - i <= F,
        "inter_past": lambda i, j: delta_min <= i - j <= delta_max,
        "inter_next": lambda i, j: delta_min <= j - i <= delta_max,
    }
    nb = {r: [] for r in RELATIONS}
    for i in range(1, T + 1):
        for r, pred in preds.items():
            nb[r].append(tuple(j for j in range(1, T + 1) if pred(i, j)))
    return RelGraph(T, P, F, delta_min, delta_max, {r: tuple(v) for r, v in nb.items()})


def degree_stats(g: RelGraph) -> dict[str, dict[str, float]]:
    stats = {}
    for r in RELATIONS:
        deg = np.array([len(s) for s in g.neighbors[r]], dtype=float)
        stats[r] = {"min": float(deg.min()), "max": float(deg.max()), "mean": float(deg.mean())}
    return stats


def lag_to_bpm(delta_frames: float, fps: float = REFERENCE_FPS) -> float:
    """Heart rate whose period spans ``delta_frames`` frames."""
    return 60.0 * fps / delta_frames


def scale_periodicity(delta_min: int, delta_max: int, fps: float) -> tuple[int, int]:
    """Rescale lag bounds tuned at 30 fps to another frame rate."""
    if fps == REFERENCE_FPS:
        return delta_min, delta_max
    k = fps / REFERENCE_FPS
    lo, hi = max(1, round(delta_min * k)), max(1, round(delta_max * k))
    log.warning("fps %g != %g: periodicity window [%d, %d] rescaled to [%d, %d]",
                fps, REFERENCE_FPS, delta_min, delta_max, lo, max(lo, hi))
    return lo, max(lo, hi)
