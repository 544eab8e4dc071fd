"""Window loop: choose a group count, cluster, abstract, predict, reserve, realise, score."""

from __future__ import annotations

import io
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..abstraction import abstract_group, group_swipe_distribution
from ..clustering import (build_features, dbscan_cluster, elbow_point, kmeans_cluster,
                          pairwise_distances, summarize_features)
from ..demand import average_version, predict_demand
from ..domain import ReservationDecision, SystemConfig, VideoCatalog
from ..qlearn import QNet, select_action
from ..solver import Instance, InfeasibleReservation, branch_and_bound, fs_schedule
from ..udt import UserTwin, swipe_counts
from ..utility import GroupContext, default_sensitivities, evaluate, unit_capacity
from .users import (LatentUser, drift_preferences, make_population, sample_user_behavior,
                    window_channel)
from .world import Scenario, snr_from_gain, synthesize_catalog

SCHEMES = ("proposed", "wdt", "dbscan-fs", "dt-bbs")
CSV_HEADER = "window,scheme,lambda_star,brs,vmrs,boc,vmoc,brc,vmrc,utility,runtime_ms"
METRIC_COLUMNS = tuple(CSV_HEADER.split(","))

DBSCAN_MIN_PTS = 4


@dataclass
class WindowMetrics:
    window: int
    scheme: str
    lambda_star: int
    brs: float
    vmrs: float
    boc: float
    vmoc: float
    brc: float
    vmrc: float
    utility: float
    runtime_ms: float = 0.0
    infeasible: bool = field(default=False, compare=False)

    def csv_row(self) -> str:
        vals = [str(self.window), self.scheme, str(self.lambda_star)]
        vals += [f"{getattr(self, k):.10g}" for k in METRIC_COLUMNS[3:]]
        return ",".join(vals)


@dataclass
class GroupMemory:
    members: np.ndarray
    pref: np.ndarray
    m: int
    n: int


@dataclass
class SimState:
    cfg: SystemConfig
    scenario: Scenario
    catalog: VideoCatalog
    users: list[LatentUser]
    twins: list[UserTwin]
    rngs: dict
    groups: list[GroupMemory] = field(default_factory=list)
    versions: np.ndarray = None      # delivered layer per user last window
    window: int = 0
    agent: Optional[QNet] = None


@dataclass
class Plan:
    partition_groups: list
    profiles: list
    contexts: list
    decision: ReservationDecision
    l_bars: list
    predicted_utility: float
    infeasible: bool = False

    @property
    def n_groups(self) -> int:
        return len(self.partition_groups)


# ---------------------------------------------------------------- setup

_SUBSTREAMS = ("population", "mobility", "behavior", "drift")


def _streams(seed: int) -> dict:
    ss = np.random.SeedSequence(seed & 0xFFFFFFFFFFFFFFFF)
    workload, agent, clustering = ss.spawn(3)
    rngs = {name: np.random.default_rng(s) for name, s in zip(_SUBSTREAMS, workload.spawn(len(_SUBSTREAMS)))}
    rngs["agent"] = np.random.default_rng(agent)
    rngs["clustering"] = np.random.default_rng(clustering)
    return rngs


def init_state(scenario: Scenario, cfg: SystemConfig, agent: QNet | None = None) -> SimState:
    """Fresh world plus one unmetered bootstrap window so that twins hold data."""
    rngs = _streams(scenario.seed)
    catalog = synthesize_catalog(cfg, rngs["population"])
    users = make_population(cfg, scenario, rngs["population"])
    twins = [UserTwin(k, cfg.C, cfg.F1, cfg.F2, cfg.video_length) for k in range(cfg.K)]
    state = SimState(cfg, scenario, catalog, users, twins, rngs, agent=agent,
                     versions=np.full(cfg.K, min(1, cfg.max_layer)))
    top = np.argsort(-catalog.popularity, kind="stable")[:cfg.rho]
    _realise(state, [top] * cfg.K)
    return state


# ---------------------------------------------------------------- grouping helpers

def align_groups(prev: list[np.ndarray], new: list[np.ndarray], n_users: int) -> list[Optional[int]]:
    """Match new groups to last window's by member overlap (Hungarian); None if unmatched."""
    if not prev or not new:
        return [None] * len(new)
    overlap = np.zeros((len(new), len(prev)))
    label = np.full(n_users, -1)
    for j, members in enumerate(prev):
        label[members] = j
    for i, members in enumerate(new):
        own = label[members]
        own = own[own >= 0]
        if own.size:
            overlap[i] += np.bincount(own, minlength=len(prev))
    rows, cols = linear_sum_assignment(-overlap)
    match: list[Optional[int]] = [None] * len(new)
    for i, j in zip(rows, cols):
        if overlap[i, j] > 0:
            match[i] = int(j)
    return match


def kdistance_eps(dist: np.ndarray, k: int = DBSCAN_MIN_PTS) -> float:
    """Radius at the knee of the sorted k-th neighbour distance curve."""
    n = dist.shape[0]
    k = min(k, n - 1)
    if k < 1:
        return 1.0
    kth = np.sort(np.sort(dist, axis=1)[:, k])[::-1]
    knee = elbow_point(kth) - 1
    eps = float(kth[knee])
    return eps if eps > 0 else 1.0


def group_snr(twins: list[UserTwin], members, B: float, scenario: Scenario) -> float:
    """Geometric mean over members of each member's mean SNR."""
    per_user = [np.mean(snr_from_gain(twins[k].channel, B, scenario)) for k in members]
    return float(np.exp(np.mean(np.log(per_user))))


def _fallback(instance: Instance) -> ReservationDecision:
    """Share a budget in proportion to the lower bounds when they do not fit.

    Largest-remainder apportionment: floors first, then the leftover units go
    to the largest fractional parts, lower index first on ties.
    """
    def scale(sub):
        lows = np.asarray(sub.lower_bounds(), dtype=float)
        total = lows.sum()
        if total <= sub.budget:
            return tuple(int(v) for v in lows)
        quota = lows * sub.budget / total
        alloc = np.floor(quota).astype(int)
        order = np.lexsort((np.arange(lows.size), -(quota - alloc)))
        alloc[order[:sub.budget - int(alloc.sum())]] += 1
        return tuple(int(v) for v in alloc)
    return ReservationDecision(scale(instance.bandwidth), scale(instance.vm), {"fallback": True})


# ---------------------------------------------------------------- planning

def plan_for_groups(state: SimState, groups: list[np.ndarray], solver: Callable,
                    use_swipes: bool = True) -> Plan:
    cfg, catalog = state.cfg, state.catalog
    match = align_groups([g.members for g in state.groups], groups, cfg.K)
    profiles, contexts, l_bars = [], [], []
    for g, members in enumerate(groups):
        prev = state.groups[match[g]] if match[g] is not None else None
        prev_pref = prev.pref if prev is not None else np.zeros(cfg.C)
        samples = np.stack([state.twins[k].prefs for k in members])
        dists = np.stack([state.twins[k].swipe_dist for k in members])
        if not use_swipes:
            dists = np.zeros_like(dists)
        profile = abstract_group(catalog, prev_pref, cfg.lambda_tilde, samples, dists,
                                 cfg.rho, cfg.swipe_aggregation)
        l_bar = average_version(state.versions[members], cfg.max_layer)
        dem = predict_demand(profile.group_swipe, catalog.sizes[profile.rec_list], l_bar,
                             cfg.mu, cfg.demand_mode)
        ell = group_snr(state.twins, members, cfg.B, state.scenario)
        xi, vt = default_sensitivities(cfg.B, ell, cfg.omega)
        contexts.append(GroupContext(ell, xi, vt, dem.R, dem.O,
                                     prev.m if prev is not None else 0,
                                     prev.n if prev is not None else 0))
        profiles.append(profile)
        l_bars.append(l_bar)
    instance = Instance.from_contexts(contexts, cfg)
    infeasible = False
    try:
        decision = solver(instance)
    except InfeasibleReservation:
        decision = _fallback(instance)
        infeasible = True
    predicted = evaluate(decision.m, decision.n, contexts, cfg).U
    return Plan(groups, profiles, contexts, decision, l_bars, predicted, infeasible)


def agent_state(state: SimState) -> np.ndarray:
    t = state.window / max(state.scenario.windows, 1)
    return np.append(summarize_features(state.twins), t)


def _kmeans_groups(state: SimState, features, Lambda: int):
    part = kmeans_cluster(features, Lambda, rng=state.rngs["clustering"])
    return part.groups(), part.inertia[-1]


def choose_plan(state: SimState, scheme: str) -> Plan:
    cfg = state.cfg
    top = min(cfg.max_clusters, cfg.K)
    if scheme in ("proposed", "dt-bbs"):
        solver = fs_schedule if scheme == "proposed" else branch_and_bound
        features = build_features(state.twins)
        if state.agent is not None:
            Lambda = min(select_action(state.agent, agent_state(state), 0.0, state.rngs["agent"]), top)
            return plan_for_groups(state, _kmeans_groups(state, features, Lambda)[0], solver)
        # without trained weights: look one window ahead over every group count
        best = None
        for Lambda in range(1, top + 1):
            plan = plan_for_groups(state, _kmeans_groups(state, features, Lambda)[0], solver)
            if best is None or plan.predicted_utility > best.predicted_utility:
                best = plan
        return best
    if scheme == "wdt":
        features = build_features(state.twins, ("pref", "location"))
        runs = [_kmeans_groups(state, features, Lambda) for Lambda in range(1, top + 1)]
        Lambda = elbow_point([inertia for _, inertia in runs])
        return plan_for_groups(state, runs[Lambda - 1][0], fs_schedule, use_swipes=False)
    if scheme == "dbscan-fs":
        features = build_features(state.twins)
        eps = kdistance_eps(pairwise_distances(features))
        part = dbscan_cluster(features, eps, DBSCAN_MIN_PTS)
        return plan_for_groups(state, part.groups(), fs_schedule)
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")


def plan_with_lambda(state: SimState, Lambda: int, solver: Callable = fs_schedule) -> Plan:
    features = build_features(state.twins)
    return plan_for_groups(state, _kmeans_groups(state, features, Lambda)[0], solver)


# ---------------------------------------------------------------- realisation

def _realise(state: SimState, rec_lists: list[np.ndarray]):
    """Advance the world one window; feed the twins.  Returns per-user mean SNR."""
    cfg, scen = state.cfg, state.scenario
    gains, track, users = window_channel(state.users, cfg.F1, cfg.T / cfg.F1, cfg.B, scen,
                                         state.rngs["mobility"])
    behaviors = [sample_user_behavior(u, rec_lists[k], state.catalog, cfg.F2, state.rngs["behavior"])
                 for k, u in enumerate(users)]
    for k, u in enumerate(users):
        u.pref = drift_preferences(u.pref, state.rngs["drift"])
    for k, twin in enumerate(state.twins):
        b = behaviors[k]
        twin.ingest_window(gains[k], track[k], b.events, b.pref_samples)
        twin.update_distribution(swipe_counts(b.events, b.delivered, cfg.C, cfg.video_length), cfg.lam)
    state.users = users
    return np.mean(snr_from_gain(gains, cfg.B, scen), axis=1)


def delivered_version(rate_per_layer, capacity: float) -> int:
    """Largest layer whose cumulative rate fits the reserved capacity (0 if none)."""
    cum = np.cumsum(rate_per_layer)
    fits = np.flatnonzero(cum <= capacity)
    return int(fits[-1]) if fits.size else 0


def run_window(state: SimState, scheme: str, timing: bool = False) -> tuple[SimState, WindowMetrics]:
    start = time.perf_counter()
    plan = choose_plan(state, scheme)
    runtime_ms = (time.perf_counter() - start) * 1e3 if timing else 0.0
    return apply_plan(state, plan, scheme, runtime_ms)


def apply_plan(state: SimState, plan: Plan, scheme: str, runtime_ms: float = 0.0):
    """Serve one window with a fixed plan and score it on the realised conditions."""
    cfg = state.cfg
    rec_lists = [None] * cfg.K
    for g, members in enumerate(plan.partition_groups):
        for k in members:
            rec_lists[k] = plan.profiles[g].rec_list
    snr = _realise(state, rec_lists)

    # score the reservation against what actually happened
    realised, versions = [], np.zeros(cfg.K, dtype=int)
    for g, members in enumerate(plan.partition_groups):
        rec = plan.profiles[g].rec_list
        ell = float(np.exp(np.mean(np.log(snr[members]))))
        latent = np.stack([state.users[k].swipe_pmf[:, :cfg.video_length] for k in members])
        truth = group_swipe_distribution(latent, state.catalog.types[rec], cfg.swipe_aggregation)
        dem = predict_demand(truth, state.catalog.sizes[rec], plan.l_bars[g], cfg.mu, cfg.demand_mode)
        xi, vt = default_sensitivities(cfg.B, ell, cfg.omega)
        ctx = plan.contexts[g]
        realised.append(GroupContext(ell, xi, vt, dem.R, dem.O, ctx.m_prev, ctx.n_prev))
        rates = state.catalog.sizes[rec].mean(axis=(0, 2))
        versions[members] = delivered_version(rates, plan.decision.m[g] * unit_capacity(cfg.B, ell))
    report = evaluate(plan.decision.m, plan.decision.n, realised, cfg)

    state.groups = [GroupMemory(np.asarray(members), plan.profiles[g].pref,
                                plan.decision.m[g], plan.decision.n[g])
                    for g, members in enumerate(plan.partition_groups)]
    state.versions = versions
    state.window += 1
    metrics = WindowMetrics(state.window, scheme, plan.n_groups,
                            float(np.mean(report.U_B)), float(np.mean(report.U_V)),
                            report.boc, report.vmoc, report.brc, report.vmrc, report.U,
                            runtime_ms, plan.infeasible)
    return state, metrics


def run_episode(scenario: Scenario, cfg: SystemConfig, agent: QNet | None = None,
                timing: bool = False) -> list[WindowMetrics]:
    state = init_state(scenario, cfg, agent)
    rows = []
    for _ in range(scenario.windows):
        state, m = run_window(state, scenario.scheme, timing)
        rows.append(m)
    return rows


# ---------------------------------------------------------------- agent environment

class ReservationEnv:
    """Episode of reservation windows where the action is the group count."""

    def __init__(self, cfg: SystemConfig, scenario: Scenario):
        self.cfg = cfg
        self.scenario = scenario
        self.episode = 0
        self.state: SimState | None = None

    @property
    def n_inputs(self) -> int:
        return 6 * 2 * 4 + 1

    def reset(self, rng: np.random.Generator):
        seed = int(rng.integers(2**62))
        self.state = init_state(Scenario(**{**asdict(self.scenario), "seed": seed}), self.cfg)
        self.episode += 1
        return agent_state(self.state)

    def step(self, action: int, rng: np.random.Generator):
        state = self.state
        Lambda = min(action, self.cfg.K)
        plan = plan_with_lambda(state, Lambda)
        state, metrics = apply_plan(state, plan, "proposed")
        done = state.window >= self.scenario.windows
        return metrics.utility, agent_state(state), done


# ---------------------------------------------------------------- output

def metrics_to_csv(rows: list[WindowMetrics]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(r.csv_row() + "\n")
    return buf.getvalue()


def metrics_to_json(rows: list[WindowMetrics]) -> str:
    out = [{k: getattr(r, k) for k in METRIC_COLUMNS} for r in rows]
    return json.dumps(out, indent=1, sort_keys=False) + "\n"


def summarize(rows: list[WindowMetrics]) -> dict:
    """Mean and (population) standard deviation of every numeric column."""
    out = {}
    for k in METRIC_COLUMNS[2:]:
        vals = np.array([getattr(r, k) for r in rows], dtype=float)
        out[k] = (float(vals.mean()), float(vals.std()))
    return out
