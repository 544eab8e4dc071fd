"""Scenario geometry, video catalog, mobility and the link budget."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import SystemConfig, VideoCatalog

KMH_TO_MS = 1.0 / 3.6
SPEED_RANGE_KMH = (2.0, 5.0)


@dataclass(frozen=True)
class Scenario:
    bs_positions: tuple = ((300.0, 500.0), (700.0, 500.0))
    arena: float = 1000.0           # square side, m
    tx_power_dbm: float = 27.0
    noise_dbm_hz: float = -174.0
    pl_ref_db: float = 38.0         # loss at 1 m
    pl_slope_db: float = 30.0       # per decade of distance
    shadowing_db: float = 4.0
    home_radius: float = 150.0      # waypoints are drawn within this distance of a user's home
    n_archetypes: int = 4
    windows: int = 90
    scheme: str = "proposed"
    seed: int = 0

    def __post_init__(self):
        if len(self.bs_positions) < 1:
            raise ValueError("need at least one base station")
        if self.windows < 1:
            raise ValueError("window count must be >= 1")
        if self.arena <= 0:
            raise ValueError("arena must have positive size")

    @property
    def bs_array(self) -> np.ndarray:
        return np.asarray(self.bs_positions, dtype=float).reshape(-1, 2)


def synthesize_catalog(cfg: SystemConfig, rng: np.random.Generator) -> VideoCatalog:
    """Uniform types, Zipf(1) popularity over a random ranking, layered per-second sizes."""
    V, L, n_layers = cfg.V, cfg.video_length, cfg.max_layer + 1
    types = rng.integers(cfg.C, size=V)
    ranks = rng.permutation(V) + 1
    popularity = 1.0 / ranks
    popularity /= popularity.sum()
    sizes = np.empty((V, n_layers, L))
    sizes[:, 0, :] = rng.uniform(0.5e6, 1.0e6, size=(V, L))
    sizes[:, 1:, :] = rng.uniform(0.3e6, 0.8e6, size=(V, n_layers - 1, L))
    return VideoCatalog(types, popularity, sizes)


# ---------------------------------------------------------------- mobility

def draw_speeds(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(*SPEED_RANGE_KMH, size=n)


def draw_waypoints(homes: np.ndarray, radius: float, arena: float, rng: np.random.Generator):
    homes = np.asarray(homes, dtype=float).reshape(-1, 2)
    angle = rng.uniform(0.0, 2.0 * np.pi, size=homes.shape[0])
    r = radius * np.sqrt(rng.uniform(size=homes.shape[0]))
    pts = homes + np.stack([r * np.cos(angle), r * np.sin(angle)], axis=1)
    return np.clip(pts, 0.0, arena)


def advance(pos, waypoint, speed_kmh, homes, dt: float, scenario: Scenario, rng: np.random.Generator):
    """Move every user toward its waypoint for ``dt`` seconds (random waypoint).

    Users that reach their waypoint stop there, then draw a fresh waypoint
    and speed.  Returns new (pos, waypoint, speed) arrays.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    pos = np.array(pos, dtype=float).reshape(-1, 2)
    waypoint = np.array(waypoint, dtype=float).reshape(-1, 2)
    speed_kmh = np.array(speed_kmh, dtype=float).reshape(-1)
    delta = waypoint - pos
    dist = np.linalg.norm(delta, axis=1)
    step = speed_kmh * KMH_TO_MS * dt
    arrived = dist <= step
    frac = np.where(arrived, 1.0, step / np.where(dist > 0, dist, 1.0))
    pos = np.clip(pos + delta * frac[:, None], 0.0, scenario.arena)
    if arrived.any():
        idx = np.flatnonzero(arrived)
        waypoint[idx] = draw_waypoints(np.asarray(homes).reshape(-1, 2)[idx],
                                       scenario.home_radius, scenario.arena, rng)
        speed_kmh[idx] = draw_speeds(idx.size, rng)
    return pos, waypoint, speed_kmh


# ---------------------------------------------------------------- link budget

def path_loss_db(d, scenario: Scenario = Scenario(), shadow_db=0.0):
    d = np.maximum(np.asarray(d, dtype=float), 1.0)
    return scenario.pl_ref_db + scenario.pl_slope_db * np.log10(d) + shadow_db


def noise_power_dbm(B: float, scenario: Scenario = Scenario()) -> float:
    return scenario.noise_dbm_hz + 10.0 * np.log10(B)


def gains_to_stations(pos, scenario: Scenario, rng: np.random.Generator | None = None) -> np.ndarray:
    """Linear power gains (n_users, n_bs), with fresh shadowing when ``rng`` is given."""
    pos = np.asarray(pos, dtype=float).reshape(-1, 2)
    d = np.linalg.norm(pos[:, None, :] - scenario.bs_array[None, :, :], axis=2)
    shadow = 0.0 if rng is None else rng.normal(0.0, scenario.shadowing_db, size=d.shape)
    return 10.0 ** (-path_loss_db(d, scenario, shadow) / 10.0)


def snr_from_gain(gain, B: float, scenario: Scenario = Scenario()):
    """Noise-limited SNR (linear) of a unit of bandwidth ``B`` at the given gain."""
    snr_db = scenario.tx_power_dbm + 10.0 * np.log10(np.asarray(gain, dtype=float)) \
        - noise_power_dbm(B, scenario)
    return 10.0 ** (snr_db / 10.0)


def channel_gain(user, bs: int, scenario: Scenario = Scenario(), rng=None) -> float:
    return float(gains_to_stations(user.position, scenario, rng)[0, bs])


def serving_station(user, scenario: Scenario = Scenario(), rng=None) -> int:
    return int(np.argmax(gains_to_stations(user.position, scenario, rng)[0]))


def sinr(user, B: float, scenario: Scenario = Scenario(), rng=None) -> float:
    """SNR toward the strongest station; no inter-station interference."""
    g = gains_to_stations(user.position, scenario, rng)[0].max()
    return float(snr_from_gain(g, B, scenario))
