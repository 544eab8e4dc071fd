"""Group-level distillation: preference, recommended list, swipe distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import VideoCatalog


@dataclass
class GroupProfile:
    pref: np.ndarray          # (C,) group preference, may exceed 1
    rec_list: np.ndarray      # (<= rho,) video ids, best first
    group_swipe: np.ndarray   # (len(rec_list), L) swipe rate per recommended video


def update_group_preference(prev, lambda_tilde: float, member_pref_samples) -> np.ndarray:
    """Discounted previous preference plus the members' average sample.

    ``member_pref_samples`` has shape (K_g, F2, C).  The weights sum to
    ``lambda_tilde + 1``, so the result is not confined to [0,1].
    """
    prev = np.asarray(prev, dtype=float)
    samples = np.asarray(member_pref_samples, dtype=float)
    if samples.size == 0:
        return lambda_tilde * prev
    if np.any(samples < 0):
        raise ValueError("preference samples must be nonnegative")
    samples = samples.reshape(-1, prev.shape[-1])
    return lambda_tilde * prev + samples.mean(axis=0)


def rank_videos(catalog: VideoCatalog, pref) -> np.ndarray:
    return catalog.popularity * np.asarray(pref, dtype=float)[catalog.types]


def build_recommended_list(scores, rho: int) -> np.ndarray:
    """Top-``rho`` ids by descending score, ties to the smaller id."""
    if rho < 1:
        raise ValueError("rho must be >= 1")
    scores = np.asarray(scores, dtype=float)
    order = np.lexsort((np.arange(scores.size), -scores))
    return order[:rho]


def group_swipe_distribution(member_dists, vtypes, aggregation: str = "mean") -> np.ndarray:
    """Swipe rate per second for each requested video type.

    ``member_dists`` is (K_g, C, L).  With ``"mean"`` the members' rates are
    averaged; ``"sum"`` accumulates them and clamps to [0,1].
    """
    dists = np.asarray(member_dists, dtype=float)
    if dists.ndim != 3 or dists.shape[0] == 0:
        raise ValueError("group must have at least one member")
    per_type = dists[:, np.asarray(vtypes), :]
    if aggregation == "mean":
        return per_type.mean(axis=0)
    if aggregation == "sum":
        return np.clip(per_type.sum(axis=0), 0.0, 1.0)
    raise ValueError(f"unknown aggregation {aggregation!r}")


def abstract_group(catalog: VideoCatalog, prev_pref, lambda_tilde, member_pref_samples,
                   member_dists, rho: int, aggregation: str = "mean") -> GroupProfile:
    pref = update_group_preference(prev_pref, lambda_tilde, member_pref_samples)
    rec = build_recommended_list(rank_videos(catalog, pref), rho)
    swipe = group_swipe_distribution(member_dists, catalog.types[rec], aggregation)
    return GroupProfile(pref, rec, swipe)
