"""Per-group bandwidth and compute demand prediction.

Two modes are supported.  ``literal`` evaluates the published formulas as
printed; ``dimensional`` keeps units consistent so that the demands are
directly comparable to a reserved rate (bits/s) and a VM capacity
(cycles/s):

=========== =============================== ==========================
quantity    literal                         dimensional
=========== =============================== ==========================
W           sum (1 - p(e)) * e              sum (1 - p(e))          [s]
Y           layers 1..l_bar                 layers 0..l_bar         [bit]
R           W / Y                           Y / W                   [bit/s]
Z           mu * (Y - base), clamped at 0   mu * (Y - base)         [cycle]
O           Z / Y                           Z / W                   [cycle/s]
=========== =============================== ==========================

Integrals over a video are unit-width sums over seconds ``e = 1..L``.
Swipe arrays are (n_videos, L); size arrays are (n_videos, L_max + 1, L).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_mode(mode: str) -> None:
    if mode not in ("literal", "dimensional"):
        raise ValueError(f"unknown demand mode {mode!r}")


@dataclass(frozen=True)
class DemandEstimate:
    W: float
    Y: float
    Z: float
    R: float
    O: float
    l_bar: int


def engagement_time(group_swipe, mode: str = "dimensional") -> float:
    _check_mode(mode)
    p = np.atleast_2d(np.asarray(group_swipe, dtype=float))
    if p.size == 0:
        return 0.0
    survive = 1.0 - p
    if mode == "literal":
        e = np.arange(1, p.shape[1] + 1, dtype=float)
        return float(np.sum(survive * e))
    return float(np.sum(survive))


def _watched_bits(group_swipe, sizes, layers) -> float:
    p = np.asarray(group_swipe, dtype=float)
    z = np.asarray(sizes, dtype=float)
    if p.size == 0 or len(layers) == 0:
        return 0.0
    per_second = z[:, layers, :].sum(axis=1)
    return float(np.sum((1.0 - p) * per_second))


def video_traffic(group_swipe, sizes, l_bar: int, mode: str = "dimensional") -> float:
    _check_mode(mode)
    max_layer = np.shape(sizes)[1] - 1 if np.ndim(sizes) == 3 else 0
    if not 0 <= l_bar <= max_layer:
        raise ValueError(f"l_bar={l_bar} outside 0..{max_layer}")
    first = 1 if mode == "literal" else 0
    return _watched_bits(group_swipe, sizes, list(range(first, l_bar + 1)))


def bandwidth_demand(W: float, Y: float, mode: str = "dimensional") -> float:
    _check_mode(mode)
    num, den = (W, Y) if mode == "literal" else (Y, W)
    return float(num / den) if den > 0 else 0.0


def computing_consumption(Y: float, group_swipe, sizes, mu: float, mode: str = "dimensional") -> float:
    _check_mode(mode)
    if mu <= 0:
        raise ValueError("mu must be positive")
    base = _watched_bits(group_swipe, sizes, [0])
    return float(mu * max(Y - base, 0.0))


def computing_demand(Z: float, W: float, Y: float, mode: str = "dimensional") -> float:
    _check_mode(mode)
    den = Y if mode == "literal" else W
    return float(Z / den) if den > 0 else 0.0


def average_version(prev_window_versions, max_layer: int = 3) -> int:
    """Rounded mean delivered layer of the previous window; 1 when there is none."""
    if prev_window_versions is None or len(prev_window_versions) == 0:
        return min(1, max_layer)
    mean = float(np.mean(prev_window_versions))
    return int(min(max(int(np.floor(mean + 0.5)), 0), max_layer))


def predict_demand(group_swipe, sizes, l_bar: int, mu: float, mode: str = "dimensional") -> DemandEstimate:
    """Full prediction chain for one group's recommended list."""
    W = engagement_time(group_swipe, mode)
    Y = video_traffic(group_swipe, sizes, l_bar, mode)
    R = bandwidth_demand(W, Y, mode)
    Z = computing_consumption(Y, group_swipe, sizes, mu, mode)
    O = computing_demand(Z, W, Y, mode)
    return DemandEstimate(W, Y, Z, R, O, l_bar)
