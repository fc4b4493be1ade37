"""Lloyd's k-means with k-means++ seeding and restarts.

The package uses this in one specialized way — k=2 over 1-D feature
contributions to separate "most relevant" from "less relevant" — but the
implementation is a plain k-means over points of any dimension.

Determinism: points are brought into canonical (lexicographic) order before
seeding, each restart draws from its own (seed, run)-derived generator, and
the winning run is chosen by (sse, run index).  Results therefore depend
neither on input ordering nor on any parallel execution schedule.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np


class ClusterError(ValueError):
    pass


class BadK(ClusterError):
    pass


class EmptyInput(ClusterError):
    pass


class DimensionMismatch(ClusterError):
    pass


class DegenerateValues(ClusterError):
    pass


@dataclass(frozen=True)
class ClusterConfig:
    k: int
    max_iter: int = 100
    n_init: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise BadK(f"k must be >= 1, got {self.k}")
        if self.max_iter < 1 or self.n_init < 1:
            raise ClusterError("max_iter and n_init must be >= 1")


@dataclass(frozen=True)
class Clustering:
    centroids: np.ndarray   # (k, m)
    assignment: np.ndarray  # (n,) int, point index -> cluster id
    sse: float


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.size == 0:
        raise EmptyInput("points must be a non-empty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch("points must be finite")
    return arr


def _seed_kmeanspp(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++: first centroid uniform, then proportional to squared distance
    from the nearest chosen centroid."""
    n = pts.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((pts - pts[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        total = d2.sum()
        if total <= 0.0:  # all remaining mass on already-chosen points
            for i in range(n):
                if not any(np.array_equal(pts[i], pts[c]) for c in chosen):
                    chosen.append(i)
                    break
            else:
                break
        else:
            i = int(rng.choice(n, p=d2 / total))
            chosen.append(i)
        d2 = np.minimum(d2, ((pts - pts[chosen[-1]]) ** 2).sum(axis=1))
    return pts[chosen].copy()


def _lloyd(pts: np.ndarray, centroids: np.ndarray, max_iter: int,
           sse_trace: list | None) -> tuple[np.ndarray, np.ndarray, float]:
    assignment = None
    for _ in range(max_iter):
        # squared distances (n, k); argmin ties resolve to the lower cluster id
        d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignment = np.argmin(d2, axis=1)
        if sse_trace is not None:
            sse_trace.append(float(d2[np.arange(len(pts)), new_assignment].sum()))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(centroids.shape[0]):
            members = pts[assignment == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    d2 = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    assignment = np.argmin(d2, axis=1)
    sse = float(d2[np.arange(len(pts)), assignment].sum())
    return centroids, assignment, sse


def kmeans(points, cfg: ClusterConfig, sse_trace: list | None = None) -> Clustering:
    """Best of cfg.n_init seeded Lloyd runs.  `sse_trace`, if a list, receives
    the per-iteration sse of every run, in run order."""
    pts = _as_points(points)
    n = pts.shape[0]
    distinct = len({tuple(row) for row in pts})
    if cfg.k > distinct:
        raise BadK(f"k={cfg.k} exceeds {distinct} distinct points")

    order = np.lexsort(pts.T[::-1])  # canonical order: input ordering is irrelevant
    canon = pts[order]

    best: tuple[float, int, np.ndarray, np.ndarray] | None = None
    for run in range(cfg.n_init):
        rng = np.random.default_rng([cfg.seed, run])
        centroids = _seed_kmeanspp(canon, cfg.k, rng)
        centroids, assignment, sse = _lloyd(canon, centroids, cfg.max_iter, sse_trace)
        if best is None or sse < best[0] - 1e-15:
            best = (sse, run, centroids, assignment)

    sse, _, centroids, canon_assignment = best
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = canon_assignment
    return Clustering(centroids, assignment, sse)


@dataclass(frozen=True)
class TwoGroups:
    """Partition of ids into a higher-valued and a lower-valued group."""

    high: frozenset
    low: frozenset
    degenerate: bool = False


def split_two_groups(values: Sequence[tuple[Hashable, float]],
                     cfg: ClusterConfig | None = None) -> TwoGroups:
    """2-means over 1-D values; "high" is the cluster with the larger centroid.

    All-equal values cannot be split; per the DegenerateValues contract the
    whole set is returned as "high" with the degenerate flag raised instead of
    an exception, so callers can surface a warning without aborting.
    """
    if len(values) < 2:
        raise EmptyInput(f"need at least 2 values, got {len(values)}")
    ids = [v[0] for v in values]
    xs = np.array([float(v[1]) for v in values])
    if not np.all(np.isfinite(xs)):
        raise DimensionMismatch("values must be finite")
    if np.all(xs == xs[0]):
        return TwoGroups(frozenset(ids), frozenset(), degenerate=True)
    if cfg is None:
        cfg = ClusterConfig(k=2)
    elif cfg.k != 2:
        raise BadK("split_two_groups requires k=2")
    clustering = kmeans(xs[:, None], cfg)
    high_cluster = int(np.argmax(clustering.centroids[:, 0]))
    high = frozenset(i for i, c in zip(ids, clustering.assignment) if c == high_cluster)
    low = frozenset(i for i, c in zip(ids, clustering.assignment) if c != high_cluster)
    return TwoGroups(high, low)
