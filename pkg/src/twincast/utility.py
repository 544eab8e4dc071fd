"""Satisfaction sigmoids, resource costs and the per-window system utility."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

_EXP_CLAMP = 700.0


def sigmoid(x):
    x = np.clip(np.asarray(x, dtype=float), -_EXP_CLAMP, _EXP_CLAMP)
    out = 1.0 / (1.0 + np.exp(-x))
    return float(out) if out.ndim == 0 else out


def unit_capacity(B: float, ell: float) -> float:
    """Rate of one bandwidth unit in bits/s (Shannon, log base 2)."""
    return B * np.log2(1.0 + ell)


def bandwidth_satisfaction(m, B, ell, xi, R):
    return sigmoid(xi * (np.asarray(m, dtype=float) * unit_capacity(B, ell) - R))


def vm_satisfaction(n, omega, vartheta, O):
    return sigmoid(vartheta * (np.asarray(n, dtype=float) * omega - O))


def default_sensitivities(B: float, ell: float, omega: float, steepness: float = 2.0):
    """Sensitivities that put one unit of surplus at ``sigmoid(steepness)``."""
    return steepness / unit_capacity(B, ell), steepness / omega


@dataclass(frozen=True)
class GroupContext:
    ell: float          # average SINR, linear
    xi: float           # per bit/s
    vartheta: float     # per cycle/s
    R: float
    O: float
    m_prev: int = 0
    n_prev: int = 0

    def __post_init__(self):
        if not self.ell > 0:
            raise ValueError("ell must be positive")
        if not (self.xi > 0 and self.vartheta > 0):
            raise ValueError("sensitivities must be positive")
        if self.m_prev < 0 or self.n_prev < 0:
            raise ValueError("previous reservations must be nonnegative")


def operation_cost(m_vec, n_vec, varpi1: float, varpi2: float) -> float:
    return float(varpi1 * np.sum(m_vec) + varpi2 * np.sum(n_vec))


def pad_previous(prev: Sequence[int], n_groups: int) -> np.ndarray:
    """Previous reservation vector resized to the current group count.

    Groups that did not exist last window start from zero; groups that
    vanished are dropped.
    """
    out = np.zeros(n_groups, dtype=np.int64)
    k = min(len(prev), n_groups)
    out[:k] = np.asarray(prev[:k], dtype=np.int64)
    return out


def reconfiguration_components(m_vec, n_vec, m_prev, n_prev, varpi3, varpi4):
    m_vec = np.asarray(m_vec)
    n_vec = np.asarray(n_vec)
    m_prev = pad_previous(list(m_prev), m_vec.size)
    n_prev = pad_previous(list(n_prev), n_vec.size)
    brc = varpi3 * float(np.sum(np.maximum(m_vec - m_prev, 0)))
    vmrc = varpi4 * float(np.sum(np.maximum(n_vec - n_prev, 0)))
    return brc, vmrc


def reconfiguration_cost(m_vec, n_vec, m_prev, n_prev, varpi3: float, varpi4: float) -> float:
    """Only increases are charged; releasing resources is free."""
    return float(sum(reconfiguration_components(m_vec, n_vec, m_prev, n_prev, varpi3, varpi4)))


def system_utility(U_B, U_V, U_O: float, U_R: float, deltas) -> float:
    delta1, delta2, delta3 = deltas
    U_B = np.atleast_1d(np.asarray(U_B, dtype=float))
    U_V = np.atleast_1d(np.asarray(U_V, dtype=float))
    if U_B.size == 0 or U_B.size != U_V.size:
        raise ValueError("need matching, nonempty per-group satisfaction vectors")
    return float(np.mean(U_B + delta1 * U_V) - delta2 * U_O - delta3 * U_R)


@dataclass(frozen=True)
class UtilityReport:
    U_B: tuple[float, ...]
    U_V: tuple[float, ...]
    boc: float
    vmoc: float
    brc: float
    vmrc: float
    U: float

    @property
    def U_O(self) -> float:
        return self.boc + self.vmoc

    @property
    def U_R(self) -> float:
        return self.brc + self.vmrc


def evaluate(m_vec, n_vec, contexts: Sequence[GroupContext], cfg) -> UtilityReport:
    """Score a reservation against group contexts with the exact sigmoids."""
    if len(contexts) == 0:
        raise ValueError("need at least one group")
    U_B = tuple(float(bandwidth_satisfaction(m, cfg.B, c.ell, c.xi, c.R))
                for m, c in zip(m_vec, contexts))
    U_V = tuple(float(vm_satisfaction(n, cfg.omega, c.vartheta, c.O))
                for n, c in zip(n_vec, contexts))
    boc = cfg.varpi1 * float(np.sum(m_vec))
    vmoc = cfg.varpi2 * float(np.sum(n_vec))
    brc, vmrc = reconfiguration_components(
        m_vec, n_vec, [c.m_prev for c in contexts], [c.n_prev for c in contexts],
        cfg.varpi3, cfg.varpi4)
    U = system_utility(U_B, U_V, boc + vmoc, brc + vmrc, cfg.deltas)
    return UtilityReport(U_B, U_V, boc, vmoc, brc, vmrc, U)
