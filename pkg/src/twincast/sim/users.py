"""Latent users: the ground truth the twins try to track."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from ..domain import SystemConfig, VideoCatalog
from ..udt import SwipeEvent
from .world import (Scenario, SPEED_RANGE_KMH, advance, draw_speeds, draw_waypoints,
                    gains_to_stations)


@dataclass
class LatentUser:
    position: np.ndarray      # (2,) m
    waypoint: np.ndarray      # (2,) m
    speed: float              # km/h
    swipe_pmf: np.ndarray     # (C, L+1); column e-1 is a swipe during second e, the last is completion
    pref: np.ndarray          # (C,) in [0,1]
    home: np.ndarray          # (2,) centre of the waypoint area
    bs: int = 0
    archetype: int = 0

    def __post_init__(self):
        lo, hi = SPEED_RANGE_KMH
        if not lo <= self.speed <= hi:
            raise ValueError(f"speed {self.speed} km/h outside [{lo}, {hi}]")
        if not np.allclose(self.swipe_pmf.sum(axis=1), 1.0):
            raise ValueError("swipe PMFs must sum to 1")


def truncated_geometric_pmf(theta: float, completion: float, L: int = 15) -> np.ndarray:
    """Swipe second ~ geometric(theta) truncated to 1..L, with a completion atom."""
    if not 0.0 < theta < 1.0 or not 0.0 <= completion <= 1.0:
        raise ValueError("need theta in (0,1) and completion in [0,1]")
    e = np.arange(L)
    body = theta * (1.0 - theta) ** e
    body /= body.sum()
    return np.append((1.0 - completion) * body, completion)


def make_population(cfg: SystemConfig, scenario: Scenario, rng: np.random.Generator) -> list[LatentUser]:
    """Users drawn around a few archetypes that share tastes, habits and a home area."""
    C, L = cfg.C, cfg.video_length
    A = scenario.n_archetypes
    margin = scenario.home_radius
    hotspots = rng.uniform(margin, scenario.arena - margin, size=(A, 2))
    base_pref = rng.uniform(0.0, 0.4, size=(A, C))
    for a in range(A):
        fav = rng.choice(C, size=2, replace=False)
        base_pref[a, fav] = rng.uniform(0.7, 1.0, size=2)
    base_theta = rng.uniform(0.05, 0.3, size=(A, C))
    base_completion = rng.uniform(0.2, 0.6, size=(A, C))

    users = []
    for k in range(cfg.K):
        a = k % A
        home = hotspots[a] + rng.normal(0.0, 40.0, size=2)
        home = np.clip(home, 0.0, scenario.arena)
        pos = draw_waypoints(home, scenario.home_radius, scenario.arena, rng)[0]
        wp = draw_waypoints(home, scenario.home_radius, scenario.arena, rng)[0]
        theta = np.clip(base_theta[a] * np.exp(rng.normal(0.0, 0.25, size=C)), 0.01, 0.9)
        completion = np.clip(base_completion[a] + rng.normal(0.0, 0.05, size=C), 0.05, 0.95)
        pmf = np.stack([truncated_geometric_pmf(theta[c], completion[c], L) for c in range(C)])
        pref = np.clip(base_pref[a] + rng.normal(0.0, 0.1, size=C), 0.0, 1.0)
        users.append(LatentUser(pos, wp, float(draw_speeds(1, rng)[0]), pmf, pref, home,
                                bs=0, archetype=a))
    return users


def step_mobility(user: LatentUser, dt: float, rng: np.random.Generator,
                  scenario: Scenario = Scenario()) -> LatentUser:
    pos, wp, speed = advance(user.position, user.waypoint, user.speed, user.home, dt, scenario, rng)
    return replace(user, position=pos[0], waypoint=wp[0], speed=float(speed[0]))


def drift_preferences(pref, rng: np.random.Generator, step: float = 0.02) -> np.ndarray:
    """One bounded random-walk step, clamped to [0,1]."""
    pref = np.asarray(pref, dtype=float)
    return np.clip(pref + rng.normal(0.0, step, size=pref.shape), 0.0, 1.0)


class Behavior(NamedTuple):
    events: list            # SwipeEvent, one per swiped video
    delivered: np.ndarray   # (C,) videos observed per type
    pref_samples: np.ndarray  # (F2, C)
    videos: np.ndarray      # (F2,) ids of the observed videos


def sample_user_behavior(user: LatentUser, rec_list, catalog: VideoCatalog, F2: int,
                         rng: np.random.Generator, pref_noise: float = 0.05) -> Behavior:
    """Observe ``F2`` videos drawn from the recommended list, plus ``F2`` preference snapshots.

    Every call consumes the same number of draws whatever the list, so
    schemes sharing a seed see the same random stream.
    """
    rec_list = np.asarray(rec_list)
    C, L1 = user.swipe_pmf.shape
    picks = rec_list[np.minimum((rng.uniform(size=F2) * rec_list.size).astype(int), rec_list.size - 1)]
    u = rng.uniform(size=F2)
    types = catalog.types[picks]
    cdf = np.cumsum(user.swipe_pmf[types], axis=1)
    outcome = np.minimum((u[:, None] >= cdf).sum(axis=1), L1 - 1)
    events = [SwipeEvent(int(v), int(c), float(e + 1))
              for v, c, e in zip(picks, types, outcome) if e < L1 - 1]
    delivered = np.bincount(types, minlength=C)
    prefs = np.clip(user.pref + rng.normal(0.0, pref_noise, size=(F2, C)), 0.0, 1.0)
    return Behavior(events, delivered, prefs, picks)


def empirical_swipe_frequencies(user: LatentUser, vtype: int, draws: int, rng: np.random.Generator):
    """Frequencies of each outcome over ``draws`` single-type videos (LLN checks)."""
    cdf = np.cumsum(user.swipe_pmf[vtype])
    outcome = np.minimum(np.searchsorted(cdf, rng.uniform(size=draws), side="right"), cdf.size - 1)
    return np.bincount(outcome, minlength=cdf.size) / draws


def window_channel(users: list[LatentUser], steps: int, dt: float, B: float, scenario: Scenario,
                   rng: np.random.Generator):
    """Move everyone for one window; returns gains (K, steps), positions (K, steps, 2), users'."""
    pos = np.stack([u.position for u in users])
    wp = np.stack([u.waypoint for u in users])
    speed = np.array([u.speed for u in users])
    homes = np.stack([u.home for u in users])
    gains = np.empty((len(users), steps))
    track = np.empty((len(users), steps, 2))
    bs = np.zeros(len(users), dtype=int)
    for s in range(steps):
        pos, wp, speed = advance(pos, wp, speed, homes, dt, scenario, rng)
        g = gains_to_stations(pos, scenario, rng)
        bs = np.argmax(g, axis=1)
        gains[:, s] = g[np.arange(len(users)), bs]
        track[:, s] = pos
    moved = [replace(u, position=pos[k], waypoint=wp[k], speed=float(speed[k]), bs=int(bs[k]))
             for k, u in enumerate(users)]
    return gains, track, moved
