"""Multicast group construction from twin data.

Every twin is described by four attribute blocks (channel, location,
swipe behaviour, preferences).  The distance between two twins is the sum
of per-block Euclidean norms.  Blocks are z-scored across the population
first, otherwise metres of location would swamp [0,1] preferences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

ATTRIBUTES = ("channel", "location", "swipe", "pref")


@dataclass
class TwinFeatures:
    blocks: tuple[np.ndarray, ...]   # each (K, d_b)
    names: tuple[str, ...]

    def __post_init__(self):
        sizes = {b.shape[0] for b in self.blocks}
        if len(sizes) != 1:
            raise ValueError("all blocks must describe the same users")

    @property
    def n(self) -> int:
        return int(self.blocks[0].shape[0])

    def row(self, i: int) -> tuple[np.ndarray, ...]:
        return tuple(b[i] for b in self.blocks)

    def subset(self, idx) -> "TwinFeatures":
        return TwinFeatures(tuple(b[idx] for b in self.blocks), self.names)


def _zscore(block: np.ndarray) -> np.ndarray:
    std = block.std()
    return (block - block.mean()) / (std if std > 0 else 1.0)


def _raw_block(twin, name: str) -> np.ndarray:
    if name == "channel":
        return 10.0 * np.log10(np.maximum(twin.channel, 1e-30))
    if name == "location":
        return twin.location.ravel()
    if name == "swipe":
        # the per-type swipe distribution distils the timestamp ring into a fixed size
        return twin.swipe_dist.ravel()
    if name == "pref":
        return twin.prefs.ravel()
    raise KeyError(name)


def build_features(twins: Sequence, attributes: Sequence[str] = ATTRIBUTES) -> TwinFeatures:
    blocks = []
    for name in attributes:
        raw = np.stack([_raw_block(t, name) for t in twins]).astype(float)
        blocks.append(_zscore(raw))
    return TwinFeatures(tuple(blocks), tuple(attributes))


def twin_distance(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    if len(a) != len(b):
        raise ValueError("twins carry different attribute blocks")
    total = 0.0
    for x, y in zip(a, b):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape:
            raise ValueError(f"block dimension mismatch: {x.shape} vs {y.shape}")
        total += float(np.linalg.norm(x - y))
    return total


def distances_to(features: TwinFeatures, point: Sequence[np.ndarray]) -> np.ndarray:
    """Distance from every twin to one point given as a tuple of blocks."""
    out = np.zeros(features.n)
    for block, p in zip(features.blocks, point):
        out += np.linalg.norm(block - p, axis=1)
    return out


def pairwise_distances(features: TwinFeatures) -> np.ndarray:
    out = np.zeros((features.n, features.n))
    for block in features.blocks:
        sq = np.sum(block * block, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * block @ block.T
        out += np.sqrt(np.maximum(d2, 0.0))
    np.fill_diagonal(out, 0.0)
    return out


def _centroid_distances(features: TwinFeatures, centroids: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros((features.n, centroids[0].shape[0]))
    for block, cen in zip(features.blocks, centroids):
        diff = block[:, None, :] - cen[None, :, :]
        out += np.sqrt(np.einsum("kgd,kgd->kg", diff, diff))
    return out


def selection_probabilities(dist_to_nearest) -> np.ndarray:
    """Seeding probability of each candidate: squared distance over the total."""
    d2 = np.asarray(dist_to_nearest, dtype=float) ** 2
    total = d2.sum()
    if total <= 0:
        raise ValueError("all candidates coincide with chosen centres")
    return d2 / total


def kmeanspp_seed(features: TwinFeatures, Lambda: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``Lambda`` seed twins.

    The first seed is uniform; each further seed is drawn with probability
    proportional to the squared distance to its nearest chosen seed.
    """
    n = features.n
    if Lambda > n:
        raise ValueError(f"cannot seed {Lambda} centres from {n} twins")
    if Lambda < 1:
        raise ValueError("Lambda must be >= 1")
    chosen = [int(rng.integers(n))]
    nearest = distances_to(features, features.row(chosen[0]))
    for _ in range(1, Lambda):
        if nearest.sum() > 0:
            idx = int(rng.choice(n, p=selection_probabilities(nearest)))
        else:
            # only duplicates of chosen seeds remain
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(free.size)])
        chosen.append(idx)
        nearest = np.minimum(nearest, distances_to(features, features.row(idx)))
    return np.asarray(chosen)


@dataclass
class Partition:
    assignment: np.ndarray                  # (K,) group index, 0-based
    centroids: tuple[np.ndarray, ...]       # per block, (Lambda, d_b)
    inertia: list[float]                    # within-cluster sum of squared distances per iteration

    @property
    def n_groups(self) -> int:
        return int(self.centroids[0].shape[0])

    def members(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == g)

    def groups(self) -> list[np.ndarray]:
        return [self.members(g) for g in range(self.n_groups)]


def _means(features: TwinFeatures, assignment: np.ndarray, k: int) -> tuple[np.ndarray, ...]:
    counts = np.bincount(assignment, minlength=k).astype(float)
    out = []
    for block in features.blocks:
        sums = np.zeros((k, block.shape[1]))
        np.add.at(sums, assignment, block)
        out.append(sums / np.maximum(counts, 1.0)[:, None])
    return tuple(out)


def _repair_empty(dist: np.ndarray, assignment: np.ndarray, k: int) -> np.ndarray:
    assignment = assignment.copy()
    for g in range(k):
        counts = np.bincount(assignment, minlength=k)
        if counts[g]:
            continue
        own = dist[np.arange(len(assignment)), assignment]
        # never strip a cluster of its last member
        own = np.where(counts[assignment] > 1, own, -np.inf)
        assignment[int(np.argmax(own))] = g
    return assignment


def kmeans_cluster(features: TwinFeatures, Lambda: int, max_iter: int = 100,
                   tol: float = 1e-6, rng: np.random.Generator | None = None) -> Partition:
    rng = rng if rng is not None else np.random.default_rng(0)
    seeds = kmeanspp_seed(features, Lambda, rng)
    centroids = tuple(b[seeds].copy() for b in features.blocks)
    inertia = []
    assignment = np.zeros(features.n, dtype=np.int64)
    for _ in range(max_iter):
        dist = _centroid_distances(features, centroids)
        assignment = _repair_empty(dist, np.argmin(dist, axis=1), Lambda)
        new = _means(features, assignment, Lambda)
        shift = sum(np.linalg.norm(a - b, axis=1) for a, b in zip(new, centroids)).max()
        centroids = new
        d = _centroid_distances(features, centroids)[np.arange(features.n), assignment]
        inertia.append(float(np.sum(d * d)))
        if shift < tol:
            break
    return Partition(assignment, centroids, inertia)


def dbscan_cluster(features: TwinFeatures, eps: float, min_pts: int) -> Partition:
    """DBSCAN over twin distances; every noise point becomes its own group."""
    if eps <= 0 or min_pts < 1:
        raise ValueError("need eps > 0 and min_pts >= 1")
    n = features.n
    dist = pairwise_distances(features)
    neighbours = [np.flatnonzero(dist[i] <= eps) for i in range(n)]
    core = np.array([nb.size >= min_pts for nb in neighbours])
    labels = np.full(n, -1)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        frontier = list(neighbours[i])
        while frontier:
            j = frontier.pop()
            if labels[j] != -1:
                continue
            labels[j] = cluster
            if core[j]:
                frontier.extend(int(q) for q in neighbours[j] if labels[q] == -1)
        cluster += 1
    for i in np.flatnonzero(labels == -1):
        labels[i] = cluster
        cluster += 1
    centroids = _means(features, labels, cluster)
    d = _centroid_distances(features, centroids)[np.arange(n), labels]
    return Partition(labels.astype(np.int64), centroids, [float(np.sum(d * d))])


def elbow_point(inertias: Sequence[float]) -> int:
    """1-based index of the knee of a decreasing curve (largest distance below the chord)."""
    y = np.asarray(inertias, dtype=float)
    if y.size <= 2:
        return 1
    x = np.arange(y.size, dtype=float)
    span = y[0] - y[-1]
    if span <= 0:
        return 1
    yn = (y - y[-1]) / span
    xn = x / x[-1]
    gap = (1.0 - xn) - yn
    return int(np.argmax(gap)) + 1


def series_stats(series) -> np.ndarray:
    """mean, std, min, max, last value and least-squares slope of a series."""
    s = np.asarray(series, dtype=float)
    if s.size == 0:
        return np.zeros(6)
    if s.size > 1:
        t = np.arange(s.size, dtype=float)
        tc = t - t.mean()
        slope = float(tc @ (s - s.mean()) / (tc @ tc))
    else:
        slope = 0.0
    return np.array([s.mean(), s.std(), s.min(), s.max(), s[-1], slope])


# reference scales that bring each attribute to O(1): dB/100, metres/1000, seconds/L, unitless
_SUMMARY_SCALE = {"channel": 100.0, "location": 1000.0, "pref": 1.0}


def summarize_features(twins: Sequence) -> np.ndarray:
    """Fixed-length state vector, independent of the number of twins.

    Per twin and attribute, a scalar series is reduced with ``series_stats``;
    the six statistics are then aggregated across twins by mean and std,
    giving 4 x 6 x 2 = 48 values.
    """
    if not twins:
        raise ValueError("need at least one twin")
    centre = np.concatenate([t.location for t in twins]).mean(axis=0)
    per_attr = {name: [] for name in ATTRIBUTES}
    for t in twins:
        gain_db = 10.0 * np.log10(np.maximum(t.channel, 1e-30))
        per_attr["channel"].append(series_stats(gain_db / _SUMMARY_SCALE["channel"]))
        radius = np.linalg.norm(t.location - centre, axis=1)
        per_attr["location"].append(series_stats(radius / _SUMMARY_SCALE["location"]))
        stamps = [ev.w for ev in t.swipes] or [float(t.L)]
        per_attr["swipe"].append(series_stats(np.asarray(stamps) / t.L))
        peak = t.prefs.max(axis=1) if t.prefs.size else np.zeros(1)
        per_attr["pref"].append(series_stats(peak / _SUMMARY_SCALE["pref"]))
    out = []
    for name in ATTRIBUTES:
        stats = np.stack(per_attr[name])
        out.append(np.concatenate([stats.mean(axis=0), stats.std(axis=0)]))
    return np.concatenate(out)
