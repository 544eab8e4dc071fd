"""Reservation optimiser.

The joint problem splits into two independent integer minimisations, one
over bandwidth units ``m`` and one over VM instances ``n``.  Each group
contributes

    weight * Psi~(x) + delta3 * varpi_rec * [x - x_prev]^+ + delta2 * varpi_op * x

where ``Psi(x) = -sigmoid(s * (x * cap - D))`` is the negated satisfaction
and ``Psi~`` replaces its concave part (below the demand threshold
``D / cap``) with the tangent line at the threshold.  The tangent has slope
``kappa = -s * cap / 4`` and crosses zero at ``b = (s * D - 2) / (s * cap)``;
feasible reservations satisfy ``x > b``.  ``weight`` is 1 for bandwidth and
``delta1`` for VMs.

Three solvers share that objective: the greedy fast scheduler, an
exhaustive enumerator used as an oracle, and branch and bound over the
continuous relaxation.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import ReservationDecision
from .utility import unit_capacity

ORACLE_LIMIT = 10**7


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(max(z, -700.0))
    return ez / (1.0 + ez)


class InfeasibleReservation(Exception):
    """The lower bounds x > b alone exceed a budget."""

    def __init__(self, deficit_m: int, deficit_n: int):
        super().__init__(f"lower bounds exceed budgets (bandwidth deficit {deficit_m}, "
                         f"VM deficit {deficit_n})")
        self.deficit_m = deficit_m
        self.deficit_n = deficit_n


class SearchSpaceTooLarge(Exception):
    pass


def tangent_params(xi: float, cap_per_unit: float, R: float) -> tuple[float, float]:
    if xi <= 0 or cap_per_unit <= 0:
        raise ValueError("sensitivity and per-unit capacity must be positive")
    kappa = -0.25 * xi * cap_per_unit
    b = (xi * R - 2.0) / (xi * cap_per_unit)
    return kappa, b


@dataclass(frozen=True)
class ConvexTerm:
    kind: str             # "bandwidth" or "vm"
    sensitivity: float    # xi or vartheta
    cap: float            # B*log2(1+ell) or omega
    demand: float         # R or O

    def __post_init__(self):
        if self.kind not in ("bandwidth", "vm"):
            raise ValueError(f"unknown term kind {self.kind!r}")
        tangent_params(self.sensitivity, self.cap, self.demand)

    @property
    def kappa(self) -> float:
        return -0.25 * self.sensitivity * self.cap

    @property
    def b(self) -> float:
        return (self.sensitivity * self.demand - 2.0) / (self.sensitivity * self.cap)

    @property
    def threshold(self) -> float:
        return self.demand / self.cap

    def exact(self, x: float) -> float:
        return -_sigmoid(self.sensitivity * (x * self.cap - self.demand))

    def _value(self, x: float) -> float:
        if x >= self.threshold:
            return self.exact(x)
        return self.kappa * (x - self.threshold) - 0.5

    def _slope(self, x: float) -> float:
        if x < self.threshold:
            return self.kappa
        s = _sigmoid(self.sensitivity * (x * self.cap - self.demand))
        return -self.sensitivity * self.cap * s * (1.0 - s)


def convexified_term(term: ConvexTerm, x: float) -> float:
    """Negated sigmoid above the threshold, its tangent line below it."""
    if not x > term.b:
        raise ValueError(f"x={x} violates the strict lower bound x > b={term.b}")
    return term._value(x)


def lower_bound(term: ConvexTerm) -> int:
    """Smallest nonnegative integer strictly above b."""
    return max(0, math.floor(term.b) + 1)


def group_objective(term: ConvexTerm, x, x_prev: int, varpi_op: float, varpi_rec: float,
                    deltas) -> float:
    delta1, delta2, delta3 = deltas
    weight = 1.0 if term.kind == "bandwidth" else delta1
    return (weight * convexified_term(term, x)
            + delta3 * varpi_rec * max(x - x_prev, 0)
            + delta2 * varpi_op * x)


@dataclass(frozen=True)
class Subproblem:
    terms: tuple[ConvexTerm, ...]
    prev: tuple[int, ...]
    budget: int
    varpi_op: float
    varpi_rec: float
    deltas: tuple[float, float, float]

    def __post_init__(self):
        if len(self.terms) != len(self.prev):
            raise ValueError("one previous reservation per group")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")

    @property
    def size(self) -> int:
        return len(self.terms)

    def value(self, g: int, x) -> float:
        return group_objective(self.terms[g], x, self.prev[g], self.varpi_op,
                               self.varpi_rec, self.deltas)

    def lower_bounds(self) -> list[int]:
        return [lower_bound(t) for t in self.terms]

    def objective(self, x: Sequence[int]) -> float:
        return sum(self.value(g, xg) for g, xg in enumerate(x))

    # pieces of the continuous relaxation
    def _weight(self, g: int) -> float:
        return 1.0 if self.terms[g].kind == "bandwidth" else self.deltas[0]

    @property
    def _op(self) -> float:
        return self.deltas[1] * self.varpi_op

    @property
    def _rec(self) -> float:
        return self.deltas[2] * self.varpi_rec


@dataclass(frozen=True)
class Instance:
    bandwidth: Subproblem
    vm: Subproblem

    def __post_init__(self):
        if self.bandwidth.size != self.vm.size:
            raise ValueError("both subproblems must cover the same groups")

    @property
    def n_groups(self) -> int:
        return self.bandwidth.size

    def objective(self, decision: ReservationDecision) -> float:
        return self.bandwidth.objective(decision.m) + self.vm.objective(decision.n)

    @classmethod
    def from_contexts(cls, contexts, cfg, M: int | None = None, N: int | None = None) -> "Instance":
        """Build from per-group contexts (``utility.GroupContext``) and a system config."""
        m_terms, n_terms = [], []
        for c in contexts:
            m_terms.append(ConvexTerm("bandwidth", c.xi, unit_capacity(cfg.B, c.ell), c.R))
            n_terms.append(ConvexTerm("vm", c.vartheta, cfg.omega, c.O))
        deltas = cfg.deltas
        return cls(
            Subproblem(tuple(m_terms), tuple(c.m_prev for c in contexts),
                       cfg.M if M is None else M, cfg.varpi1, cfg.varpi3, deltas),
            Subproblem(tuple(n_terms), tuple(c.n_prev for c in contexts),
                       cfg.N if N is None else N, cfg.varpi2, cfg.varpi4, deltas),
        )


def _check_lower_bounds(instance: Instance) -> None:
    deficit_m = sum(instance.bandwidth.lower_bounds()) - instance.bandwidth.budget
    deficit_n = sum(instance.vm.lower_bounds()) - instance.vm.budget
    if deficit_m > 0 or deficit_n > 0:
        raise InfeasibleReservation(max(deficit_m, 0), max(deficit_n, 0))


# ---------------------------------------------------------------- fast scheduling

def _greedy(sub: Subproblem) -> list[int]:
    x = sub.lower_bounds()
    remaining = sub.budget - sum(x)
    current = [sub.value(g, xg) for g, xg in enumerate(x)]
    while remaining > 0:
        best_g, best_delta = -1, 0.0
        for g in range(sub.size):
            delta = sub.value(g, x[g] + 1) - current[g]
            if best_g < 0 or delta < best_delta:
                best_g, best_delta = g, delta
        if best_g < 0 or best_delta >= 0:
            break
        x[best_g] += 1
        current[best_g] += best_delta
        current[best_g] = sub.value(best_g, x[best_g])
        remaining -= 1
    return x


def fs_schedule(instance: Instance) -> ReservationDecision:
    """Greedy marginal allocation on each subproblem.

    Every group starts at its lower bound; spare units go one at a time to
    the group whose objective drops the most, lowest index on ties, until no
    unit lowers the objective or the budget is spent.
    """
    _check_lower_bounds(instance)
    m = _greedy(instance.bandwidth)
    n = _greedy(instance.vm)
    value = instance.bandwidth.objective(m) + instance.vm.objective(n)
    return ReservationDecision(tuple(m), tuple(n), {"objective": value})


# ---------------------------------------------------------------- exhaustive oracle

def search_space_size(sub: Subproblem) -> int:
    slack = sub.budget - sum(sub.lower_bounds())
    if slack < 0:
        return 0
    return math.comb(slack + sub.size, sub.size)


def _enumerate(sub: Subproblem) -> list[int]:
    lows = sub.lower_bounds()
    slack = sub.budget - sum(lows)
    if sub.size == 0:
        return []
    tables = [[sub.value(g, lows[g] + k) for k in range(slack + 1)] for g in range(sub.size)]
    best_val = math.inf
    best = None
    x = [0] * sub.size

    def visit(g: int, left: int, partial: float):
        nonlocal best_val, best
        if g == sub.size:
            if partial < best_val:
                best_val, best = partial, list(x)
            return
        for k in range(left + 1):
            x[g] = k
            visit(g + 1, left - k, partial + tables[g][k])

    visit(0, slack, 0)
    return [lo + k for lo, k in zip(lows, best)]


def exhaustive_oracle(instance: Instance, limit: int = ORACLE_LIMIT) -> ReservationDecision:
    """Exact minimiser by enumeration; ties go to the lexicographically smallest vector."""
    _check_lower_bounds(instance)
    states = search_space_size(instance.bandwidth) + search_space_size(instance.vm)
    if states > limit:
        raise SearchSpaceTooLarge(f"{states} states exceed the limit of {limit}")
    m = _enumerate(instance.bandwidth)
    n = _enumerate(instance.vm)
    value = instance.bandwidth.objective(m) + instance.vm.objective(n)
    return ReservationDecision(tuple(m), tuple(n), {"objective": value, "states": states})


# ---------------------------------------------------------------- branch and bound

def _inverse_slope(term: ConvexTerm, weight: float, t: float) -> float:
    """Point where the weighted slope of Psi~ equals -t (convex, so unique up to flats)."""
    steep = -weight * term.kappa          # = weight * s * cap / 4
    if t >= steep:
        return -math.inf
    if t <= 0:
        return math.inf
    sc = term.sensitivity * term.cap
    q = t / (weight * sc)                 # sigma * (1 - sigma), < 1/4
    s = 0.5 * (1.0 + math.sqrt(max(1.0 - 4.0 * q, 0.0)))
    return term.threshold + math.log(s / (1.0 - s)) / sc


def _relaxed_argmin(sub: Subproblem, g: int, lam: float, lo: float, hi: float) -> float:
    term, w, prev = sub.terms[g], sub._weight(g), sub.prev[g]
    left = _inverse_slope(term, w, sub._op + lam)
    if left <= prev:
        x = left
    else:
        right = _inverse_slope(term, w, sub._op + lam + sub._rec)
        x = right if right >= prev else prev
    return min(max(x, lo), hi)


def _relax(sub: Subproblem, lo: list[int], hi: list[int], iters: int = 64):
    """Lagrangian dual of the continuous relaxation on the box [lo, hi].

    Returns (lower bound, feasible relaxed point, infeasible-side point).
    Any multiplier gives a valid bound; bisection pushes it to the optimum.
    """
    G = sub.size

    def argmin(lam):
        return [_relaxed_argmin(sub, g, lam, lo[g], hi[g]) for g in range(G)]

    def dual(x, lam):
        return sum(sub.value(g, x[g]) for g in range(G)) + lam * (sum(x) - sub.budget)

    x0 = argmin(0.0)
    if sum(x0) <= sub.budget + 1e-12:
        return dual(x0, 0.0), x0, x0
    lam_lo = 0.0
    lam_hi = max(-sub._weight(g) * sub.terms[g].kappa for g in range(G)) + 1.0
    x_lo, x_hi = x0, argmin(lam_hi)
    for _ in range(iters):
        mid = 0.5 * (lam_lo + lam_hi)
        if mid <= lam_lo or mid >= lam_hi:
            break
        x_mid = argmin(mid)
        if sum(x_mid) > sub.budget:
            lam_lo, x_lo = mid, x_mid
        else:
            lam_hi, x_hi = mid, x_mid
    return max(dual(x_lo, lam_lo), dual(x_hi, lam_hi)), x_hi, x_lo


def _is_integral(x: Sequence[float], eps: float = 1e-9) -> bool:
    return all(abs(v - round(v)) <= eps for v in x)


def _bnb(sub: Subproblem, tol: float) -> tuple[list[int], int]:
    G = sub.size
    if G == 0:
        return [], 0
    lows = sub.lower_bounds()
    slack = sub.budget - sum(lows)
    root_hi = [lo + slack for lo in lows]
    incumbent = list(lows)
    best = sub.objective(incumbent)
    counter = itertools.count()
    heap = [(-math.inf, next(counter), lows, root_hi)]
    nodes = 0
    while heap:
        parent_bound, _, lo, hi = heapq.heappop(heap)
        if parent_bound >= best - tol:
            continue
        nodes += 1
        bound, x_feas, x_other = _relax(sub, lo, hi)
        if bound >= best - tol:
            continue
        floor_pt = [max(lo[g], min(hi[g], math.floor(x_feas[g] + 1e-9))) for g in range(G)]
        if sum(floor_pt) <= sub.budget:
            val = sub.objective(floor_pt)
            if val < best:
                best, incumbent = val, floor_pt
        if _is_integral(x_feas) and bound >= sub.objective([round(v) for v in x_feas]) - tol:
            continue
        # branch on the most fractional coordinate, else on the widest disagreement
        frac = [abs(v - round(v)) for v in x_feas]
        g = int(np.argmax(frac))
        if frac[g] > 1e-9:
            split = math.floor(x_feas[g])
        else:
            gaps = [abs(a - b) if hi[k] > lo[k] else -1.0 for k, (a, b) in enumerate(zip(x_feas, x_other))]
            g = int(np.argmax(gaps))
            if gaps[g] <= 0:
                widths = [hi[k] - lo[k] for k in range(G)]
                g = int(np.argmax(widths))
                if widths[g] == 0:
                    continue
            split = math.floor(0.5 * (x_feas[g] + x_other[g]))
        split = min(max(split, lo[g]), hi[g] - 1)
        left_hi = list(hi)
        left_hi[g] = split
        right_lo = list(lo)
        right_lo[g] = split + 1
        heapq.heappush(heap, (bound, next(counter), list(lo), left_hi))
        if sum(right_lo) <= sub.budget:
            heapq.heappush(heap, (bound, next(counter), right_lo, list(hi)))
    return incumbent, nodes


def branch_and_bound(instance: Instance, tol: float = 1e-12) -> ReservationDecision:
    """Exact integer optimum by best-first branch and bound.

    Node bounds come from the Lagrangian dual of the continuous relaxation,
    maximised by bisection on the common marginal value.
    """
    _check_lower_bounds(instance)
    m, nodes_m = _bnb(instance.bandwidth, tol)
    n, nodes_n = _bnb(instance.vm, tol)
    value = instance.bandwidth.objective(m) + instance.vm.objective(n)
    return ReservationDecision(tuple(m), tuple(n),
                               {"objective": value, "nodes": (nodes_m, nodes_n)})


# ---------------------------------------------------------------- instance generation

def random_instance(rng: np.random.Generator, max_groups: int = 4, max_M: int = 8,
                    max_N: int = 6) -> Instance:
    """Random instance with feasible lower bounds, for oracle cross-checks."""
    while True:
        G = int(rng.integers(1, max_groups + 1))
        M = int(rng.integers(0, max_M + 1))
        N = int(rng.integers(0, max_N + 1))
        deltas = (float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.0, 0.5)),
                  float(rng.uniform(0.0, 0.5)))
        varpi = rng.uniform(0.2, 1.2, size=4)

        omega = float(rng.uniform(0.5, 2.0))   # VMs share one capacity

        def terms(kind):
            out = []
            for _ in range(G):
                s = float(rng.uniform(0.3, 4.0))
                cap = float(rng.uniform(0.5, 2.0)) if kind == "bandwidth" else omega
                out.append(ConvexTerm(kind, s, cap, float(rng.uniform(0.0, 3.0) * cap)))
            return tuple(out)

        inst = Instance(
            Subproblem(terms("bandwidth"), tuple(int(v) for v in rng.integers(0, 4, G)),
                       M, float(varpi[0]), float(varpi[2]), deltas),
            Subproblem(terms("vm"), tuple(int(v) for v in rng.integers(0, 4, G)),
                       N, float(varpi[1]), float(varpi[3]), deltas),
        )
        if (sum(inst.bandwidth.lower_bounds()) <= M and sum(inst.vm.lower_bounds()) <= N):
            return inst
