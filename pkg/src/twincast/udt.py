"""User digital twins: a bounded per-user data pool and the swipe estimator."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np


class SwipeEvent(NamedTuple):
    video: int
    vtype: int      # 0-based type index
    w: float        # swipe time in seconds, in (0, L]


@dataclass
class SwipeCounts:
    A: np.ndarray       # (C, L) swipes binned by second
    A_hat: np.ndarray   # (C,) videos delivered per type


def update_swipe_distribution(p_prev, lam, A_e, A_hat):
    """Exponentially weighted update of a per-second swipe rate.

    ``p_new = lam * p_prev + (1 - lam) * A_e / A_hat``; where ``A_hat`` is 0
    there is no new evidence and the empirical term falls back to ``p_prev``.
    Works elementwise on scalars or broadcastable arrays.
    """
    p_prev = np.asarray(p_prev, dtype=float)
    A_e = np.asarray(A_e, dtype=float)
    A_hat = np.asarray(A_hat, dtype=float)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0,1] (got {lam})")
    if np.any(A_e > A_hat):
        raise ValueError("swipe count exceeds delivered count")
    with np.errstate(divide="ignore", invalid="ignore"):
        empirical = np.where(A_hat > 0, A_e / np.where(A_hat > 0, A_hat, 1.0), p_prev)
    out = lam * p_prev + (1.0 - lam) * empirical
    return float(out) if out.ndim == 0 else out


@dataclass
class UserTwin:
    user_id: int
    C: int
    F1: int
    F2: int
    L: int = 15
    channel: np.ndarray = field(default=None)     # (<=F1,) linear gains
    location: np.ndarray = field(default=None)    # (<=F1, 2) metres
    swipes: list = field(default_factory=list)    # <= F2 SwipeEvent
    prefs: np.ndarray = field(default=None)       # (<=F2, C) in [0,1]
    swipe_dist: np.ndarray = field(default=None)  # (C, L) in [0,1]

    def __post_init__(self):
        if self.channel is None:
            self.channel = np.zeros(0)
        if self.location is None:
            self.location = np.zeros((0, 2))
        if self.prefs is None:
            self.prefs = np.zeros((0, self.C))
        if self.swipe_dist is None:
            # uniform over the L seconds plus "watched to the end"
            self.swipe_dist = np.full((self.C, self.L), 1.0 / (self.L + 1))

    def ingest_window(self, channel_samples, locations, swipe_events, pref_samples) -> "UserTwin":
        """Replace the pool with one window of samples; older data is evicted."""
        channel_samples = np.asarray(channel_samples, dtype=float)
        locations = np.asarray(locations, dtype=float).reshape(-1, 2)
        pref_samples = np.asarray(pref_samples, dtype=float).reshape(-1, self.C)
        swipe_events = [SwipeEvent(*ev) for ev in swipe_events]
        if channel_samples.shape[0] != self.F1:
            raise ValueError(f"expected F1={self.F1} channel samples, got {channel_samples.shape[0]}")
        if locations.shape[0] != self.F1:
            raise ValueError(f"expected F1={self.F1} locations, got {locations.shape[0]}")
        if len(swipe_events) > self.F2:
            raise ValueError(f"expected at most F2={self.F2} swipe events, got {len(swipe_events)}")
        if pref_samples.shape[0] != self.F2:
            raise ValueError(f"expected F2={self.F2} preference samples, got {pref_samples.shape[0]}")
        if np.any((pref_samples < 0) | (pref_samples > 1)):
            raise ValueError("preference samples must lie in [0,1]")
        self.channel = channel_samples.copy()
        self.location = locations.copy()
        self.swipes = swipe_events
        self.prefs = pref_samples.copy()
        return self

    def swipe_counts(self, delivered) -> SwipeCounts:
        return swipe_counts(self.swipes, delivered, self.C, self.L)

    def update_distribution(self, counts: SwipeCounts, lam: float) -> "UserTwin":
        self.swipe_dist = update_swipe_distribution(
            self.swipe_dist, lam, counts.A, counts.A_hat[:, None])
        return self

    def to_record(self) -> dict:
        return {
            "user_id": self.user_id, "C": self.C, "F1": self.F1, "F2": self.F2, "L": self.L,
            "channel": self.channel.tolist(),
            "location": self.location.tolist(),
            "swipes": [list(ev) for ev in self.swipes],
            "prefs": self.prefs.tolist(),
            "swipe_dist": self.swipe_dist.tolist(),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "UserTwin":
        C = rec["C"]
        return cls(
            user_id=rec["user_id"], C=C, F1=rec["F1"], F2=rec["F2"], L=rec["L"],
            channel=np.asarray(rec["channel"], dtype=float),
            location=np.asarray(rec["location"], dtype=float).reshape(-1, 2),
            swipes=[SwipeEvent(int(v), int(c), float(w)) for v, c, w in rec["swipes"]],
            prefs=np.asarray(rec["prefs"], dtype=float).reshape(-1, C),
            swipe_dist=np.asarray(rec["swipe_dist"], dtype=float),
        )


def swipe_counts(events: Iterable, delivered, C: int, L: int = 15) -> SwipeCounts:
    """Bin swipe events by ``ceil(w)`` per type; completions only count in ``A_hat``."""
    A = np.zeros((C, L), dtype=np.int64)
    A_hat = np.asarray(delivered, dtype=np.int64).copy()
    if A_hat.shape != (C,):
        raise ValueError(f"delivered counts must have length C={C}")
    for ev in events:
        ev = SwipeEvent(*ev)
        if not 0.0 < ev.w <= L:
            raise ValueError(f"swipe timestamp {ev.w} outside (0, {L}]")
        A[ev.vtype, math.ceil(ev.w) - 1] += 1
    if np.any(A.sum(axis=1) > A_hat):
        raise ValueError("more swipe events than delivered videos for some type")
    return SwipeCounts(A, A_hat)


def dump_twins(twins: Iterable[UserTwin]) -> str:
    """One JSON record per line."""
    return "".join(json.dumps(t.to_record(), separators=(",", ":")) + "\n" for t in twins)


def load_twins(text: str) -> list[UserTwin]:
    return [UserTwin.from_record(json.loads(line)) for line in text.splitlines() if line.strip()]
