import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from twincast.abstraction import (abstract_group, build_recommended_list, group_swipe_distribution,
                                  rank_videos, update_group_preference)
from twincast.domain import VideoCatalog


def catalog(types, popularity):
    types = np.asarray(types)
    return VideoCatalog(types, np.asarray(popularity, float), np.ones((len(types), 4, 15)))


class TestGroupPreference:
    def test_pure_average(self):
        out = update_group_preference([0.9], 0.0, np.full((1, 1, 1), 0.6))
        assert out[0] == pytest.approx(0.6)

    def test_worked_example(self):
        samples = np.array([[[0.3], [0.5]]])
        assert update_group_preference([0.5], 0.3, samples)[0] == pytest.approx(0.55)

    def test_ones(self):
        out = update_group_preference(np.zeros(8), 0.0, np.ones((2, 5, 8)))
        assert np.allclose(out, 1.0)

    def test_may_exceed_one(self):
        assert update_group_preference([1.0], 0.3, np.ones((1, 5, 1)))[0] == pytest.approx(1.3)

    def test_empty_group(self):
        out = update_group_preference([0.5, 0.2], 0.3, np.zeros((0, 5, 2)))
        assert np.allclose(out, [0.15, 0.06])

    def test_negative_samples_rejected(self):
        with pytest.raises(ValueError):
            update_group_preference([0.5], 0.3, -np.ones((1, 1, 1)))


class TestRanking:
    def test_product(self):
        cat = catalog([0, 1], [0.5, 0.5])
        assert rank_videos(cat, [0.9, 0.4])[1] == pytest.approx(0.2)

    def test_zero_popularity(self):
        cat = catalog([0, 1], [0.0, 0.5])
        assert rank_videos(cat, [5.0, 1.0])[0] == 0.0

    def test_uniform_pref_keeps_popularity_order(self):
        rng = np.random.default_rng(0)
        pop = rng.uniform(size=30)
        cat = catalog(rng.integers(4, size=30), pop)
        scores = rank_videos(cat, np.full(4, 0.7))
        assert np.array_equal(build_recommended_list(scores, 30), build_recommended_list(pop, 30))

    def test_top_rho(self):
        assert build_recommended_list([0.3, 0.9, 0.5], 2).tolist() == [1, 2]

    def test_ties_ascending(self):
        assert build_recommended_list(np.ones(6), 3).tolist() == [0, 1, 2]

    def test_rho_above_catalog(self):
        out = build_recommended_list([0.1, 0.3, 0.2], 10)
        assert out.tolist() == [1, 2, 0]

    @given(arrays(np.float64, st.integers(1, 40), elements=st.floats(0, 1)), st.integers(1, 50))
    def test_list_properties(self, scores, rho):
        out = build_recommended_list(scores, rho)
        assert len(out) == min(rho, scores.size)
        assert len(set(out.tolist())) == len(out)
        assert np.array_equal(out, build_recommended_list(scores.copy(), rho))
        assert np.all(np.diff(scores[out]) <= 0)


class TestGroupSwipe:
    def test_mean_of_members(self):
        dists = np.zeros((2, 1, 15))
        dists[0, 0, 4], dists[1, 0, 4] = 0.2, 0.4
        out = group_swipe_distribution(dists, [0])
        assert out[0, 4] == pytest.approx(0.3)
        assert group_swipe_distribution(dists, [0], "sum")[0, 4] == pytest.approx(0.6)

    def test_single_member(self):
        d = np.random.default_rng(0).uniform(size=(1, 3, 15))
        assert np.array_equal(group_swipe_distribution(d, [2, 0]), d[0, [2, 0]])

    def test_zero(self):
        assert np.all(group_swipe_distribution(np.zeros((3, 2, 15)), [1]) == 0)

    def test_empty_group(self):
        with pytest.raises(ValueError):
            group_swipe_distribution(np.zeros((0, 2, 15)), [0])

    def test_sum_mode_clamps(self):
        assert group_swipe_distribution(np.full((3, 1, 15), 0.5), [0], "sum").max() == 1.0

    @given(arrays(np.float64, (4, 3, 15), elements=st.floats(0, 1)))
    def test_closure(self, d):
        out = group_swipe_distribution(d, [0, 1, 2])
        assert np.all((out >= 0) & (out <= 1 + 1e-12))


def test_abstract_group_shapes():
    rng = np.random.default_rng(0)
    cat = catalog(rng.integers(8, size=100), rng.uniform(size=100))
    prof = abstract_group(cat, np.zeros(8), 0.3, rng.uniform(size=(3, 5, 8)),
                          rng.uniform(0, 0.1, size=(3, 8, 15)), rho=20)
    assert prof.rec_list.shape == (20,) and prof.group_swipe.shape == (20, 15)
