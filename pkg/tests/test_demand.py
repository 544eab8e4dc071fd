import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from twincast.demand import (average_version, bandwidth_demand, computing_consumption,
                             computing_demand, engagement_time, predict_demand, video_traffic)

MB = 1e6


def sizes(n_videos=1, L=3, layers=2, value=MB):
    return np.full((n_videos, layers, L), value)


class TestEngagement:
    def test_literal(self):
        assert engagement_time(np.zeros((1, 3)), "literal") == 6

    def test_dimensional(self):
        assert engagement_time(np.zeros((1, 3))) == 3

    @pytest.mark.parametrize("mode", ["literal", "dimensional"])
    def test_always_swiped(self, mode):
        assert engagement_time(np.ones((2, 3)), mode) == 0

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            engagement_time(np.zeros((1, 3)), "other")


class TestTraffic:
    def test_dimensional_includes_base(self):
        assert video_traffic(np.zeros((1, 3)), sizes(), 1) == pytest.approx(6 * MB)

    def test_literal_skips_base(self):
        assert video_traffic(np.zeros((1, 3)), sizes(), 1, "literal") == pytest.approx(3 * MB)

    def test_base_only(self):
        z = sizes()
        z[:, 1] = 5 * MB
        assert video_traffic(np.zeros((1, 3)), z, 0) == pytest.approx(3 * MB)

    def test_layer_out_of_range(self):
        with pytest.raises(ValueError):
            video_traffic(np.zeros((1, 3)), sizes(), 2)


class TestRates:
    def test_bandwidth_dimensional(self):
        assert bandwidth_demand(3.0, 6 * MB) == pytest.approx(2 * MB)

    def test_bandwidth_literal(self):
        assert bandwidth_demand(6.0, 3.0, "literal") == pytest.approx(2.0)

    def test_no_watching(self):
        assert bandwidth_demand(0.0, 6 * MB) == 0.0

    def test_consumption(self):
        z = computing_consumption(6 * MB, np.zeros((1, 3)), sizes(), mu=2e3)
        assert z == pytest.approx(6e9)

    def test_consumption_base_only(self):
        p = np.zeros((1, 3))
        y = video_traffic(p, sizes(), 0)
        assert computing_consumption(y, p, sizes(), 2e3) == 0.0

    def test_consumption_literal_clamps(self):
        assert computing_consumption(3 * MB, np.zeros((1, 3)), sizes(), 2e3, "literal") == 0.0

    def test_compute_demand(self):
        assert computing_demand(6e9, 3.0, 6 * MB) == pytest.approx(2e9)
        assert computing_demand(6.0, 99.0, 3.0, "literal") == pytest.approx(2.0)
        assert computing_demand(0.0, 3.0, 6.0) == 0.0


class TestAverageVersion:
    def test_mean(self):
        assert average_version([1, 2, 2, 3]) == 2

    def test_first_window(self):
        assert average_version([]) == 1 and average_version(None) == 1

    def test_all_top(self):
        assert average_version([3, 3, 3]) == 3


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(p=arrays(np.float64, (3, 15), elements=st.floats(0, 1)),
           i=st.integers(0, 2), e=st.integers(0, 14), bump=st.floats(0, 1),
           mode=st.sampled_from(["literal", "dimensional"]))
    def test_monotone_in_swipe(self, p, i, e, bump, mode):
        z = np.random.default_rng(0).uniform(0.3, 1.0, (3, 4, 15)) * MB
        q = p.copy()
        q[i, e] = min(1.0, q[i, e] + bump)
        a, b = predict_demand(p, z, 2, 2e3, mode), predict_demand(q, z, 2, 2e3, mode)
        assert b.W <= a.W + 1e-9 and b.Y <= a.Y + 1e-6 and b.Z <= a.Z + 1e-3

    @settings(max_examples=30, deadline=None)
    @given(p=arrays(np.float64, (2, 15), elements=st.floats(0, 1)), l_bar=st.integers(0, 3))
    def test_scaling(self, p, l_bar):
        z = np.random.default_rng(1).uniform(0.3, 1.0, (2, 4, 15)) * MB
        a, b = predict_demand(p, z, l_bar, 2e3), predict_demand(p, 2 * z, l_bar, 2e3)
        assert b.W == a.W
        assert b.Y == pytest.approx(2 * a.Y) and b.Z == pytest.approx(2 * a.Z, abs=1e-3)

    @given(p=arrays(np.float64, (2, 15), elements=st.floats(0, 1)), l_bar=st.integers(0, 3))
    def test_dimensional_z_nonnegative(self, p, l_bar):
        z = np.random.default_rng(2).uniform(0.3, 1.0, (2, 4, 15)) * MB
        d = predict_demand(p, z, l_bar, 2e3)
        assert d.Z >= 0 and d.Y >= video_traffic(p, z, 0) - 1e-6

    def test_empty_list(self):
        d = predict_demand(np.zeros((0, 15)), np.zeros((0, 4, 15)), 1, 2e3)
        assert (d.W, d.Y, d.Z, d.R, d.O) == (0, 0, 0, 0, 0)
