import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from twincast.qlearn import (Agent, AgentConfig, ContextualBandit, QNet, ReplayBuffer,
                             ddqn_target, greedy_accuracy, load_weights, save_weights,
                             select_action, sync_target, train, train_step)


def linear_net(W, b=None):
    """Single-layer net with hand-set weights (no hidden layer)."""
    W = np.asarray(W, dtype=float)
    net = QNet(W.shape)
    net.params = [W, np.zeros(W.shape[1]) if b is None else np.asarray(b, dtype=float)]
    return net


def fd_gradient_check(net, s, a, y, h=1e-6):
    _, grads = net.loss_and_grads(s, a, y)
    worst = 0.0
    for p, g in zip(net.params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = net.loss_and_grads(s, a, y)[0]
            p[idx] = old - h
            dn = net.loss_and_grads(s, a, y)[0]
            p[idx] = old
            num = (up - dn) / (2 * h)
            worst = max(worst, abs(num - g[idx]) / max(abs(num), abs(g[idx]), 1e-7))
    return worst


class TestQNet:
    def test_shapes(self):
        net = QNet.for_task(49, 10)
        assert net.sizes == (49, 512, 256, 128, 64, 10)
        assert net.forward(np.zeros(49)).shape == (10,)
        assert net.forward(np.zeros((3, 49))).shape == (3, 10)
        assert net.is_finite()

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            QNet((4, 2, 2)).forward(np.zeros(5))

    def test_gradient_check(self):
        rng = np.random.default_rng(3)
        net = QNet((4, 2, 2), rng)
        net.params[1][:] = 0.5          # keep hidden units away from the ReLU kink
        s = rng.normal(size=(6, 4))
        a = rng.integers(2, size=6)
        y = rng.normal(size=6)
        assert fd_gradient_check(net, s, a, y) < 1e-5

    def test_zero_residual(self):
        rng = np.random.default_rng(0)
        net = QNet((4, 8, 3), rng)
        s = rng.normal(size=(5, 4))
        a = np.array([0, 1, 2, 1, 0])
        y = net.forward(s)[np.arange(5), a]
        before = [p.copy() for p in net.params]
        loss, grads = net.loss_and_grads(s, a, y)
        net.apply_gradients(grads, 1e-3)
        assert loss == 0.0
        assert all(np.allclose(p, q, atol=1e-12) for p, q in zip(net.params, before))

    def test_loss_decreases(self):
        rng = np.random.default_rng(1)
        net = QNet((4, 16, 3), rng)
        s = rng.normal(size=(32, 4))
        a = rng.integers(3, size=32)
        y = rng.normal(size=32)
        losses = []
        for _ in range(100):
            loss, grads = net.loss_and_grads(s, a, y)
            net.apply_gradients(grads, 1e-2)
            losses.append(loss)
        assert losses[-1] < losses[0]


class TestSelectAction:
    def test_uniform_when_exploring(self):
        net = QNet((3, 10))
        rng = np.random.default_rng(0)
        draws = [select_action(net, np.zeros(3), 1.0, rng) for _ in range(10_000)]
        counts = np.bincount(draws, minlength=11)[1:]
        assert set(draws) <= set(range(1, 11))
        assert stats.chisquare(counts).pvalue > 0.001

    def test_greedy(self):
        q = [0.1, 0.9, 0.3, 0.0, -1.0, 0.2, 0.2, 0.5, 0.1, 0.0]
        net = linear_net(np.zeros((1, 10)), q)
        assert select_action(net, [0.0], 0.0, np.random.default_rng(0)) == 2

    def test_ties_smallest(self):
        net = linear_net(np.zeros((2, 10)))
        assert select_action(net, [1.0, 2.0], 0.0, np.random.default_rng(0)) == 1


class TestTarget:
    def test_arithmetic(self):
        main = linear_net([[0.0, 0.0]], [0.0, 1.0])
        target = linear_net([[0.0, 0.0]], [5.0, 2.0])
        assert ddqn_target(1.0, 0.95, [0.0], main, target) == pytest.approx(2.9)

    def test_myopic(self):
        net = linear_net([[1.0, 2.0]])
        assert ddqn_target(0.7, 0.0, [3.0], net, net) == 0.7

    def test_decoupled_argmax(self):
        # main prefers action 0, target prefers action 1
        main = linear_net([[1.0, -1.0]])
        target = linear_net([[1.0, 4.0]])
        y = ddqn_target(0.0, 0.5, [1.0], main, target)
        assert y == pytest.approx(0.5 * 1.0)
        assert y != pytest.approx(0.5 * 4.0)

    def test_terminal(self):
        net = linear_net([[1.0, 2.0]])
        assert ddqn_target(1.0, 0.9, [3.0], net, net, done=1.0) == 1.0


class TestTraining:
    def test_insufficient_buffer(self):
        net = QNet((2, 2))
        buf = ReplayBuffer(10)
        buf.push([0, 0], 0, 1.0, [0, 0])
        assert train_step(net, net.clone(), buf, AgentConfig(batch=4), np.random.default_rng(0)) is None

    def test_target_untouched(self):
        rng = np.random.default_rng(0)
        main = QNet((2, 4, 2), rng)
        target = main.clone()
        buf = ReplayBuffer(10)
        for i in range(8):
            buf.push(rng.normal(size=2), i % 2, 1.0, rng.normal(size=2))
        frozen = [p.copy() for p in target.params]
        assert train_step(main, target, buf, AgentConfig(batch=4), rng) is not None
        assert all(np.array_equal(p, q) for p, q in zip(target.params, frozen))

    def test_sync(self):
        rng = np.random.default_rng(0)
        main, target = QNet((3, 5, 2), rng), QNet((3, 5, 2), rng)
        probes = rng.normal(size=(20, 3))
        sync_target(main, target)
        assert np.array_equal(main(probes), target(probes))
        snapshot = [p.copy() for p in target.params]
        sync_target(main, target)
        assert all(np.array_equal(p, q) for p, q in zip(target.params, snapshot))

    def test_sync_shape_mismatch(self):
        with pytest.raises(ValueError):
            sync_target(QNet((3, 2)), QNet((4, 2)))


class TestReplayBuffer:
    def test_fifo(self):
        buf = ReplayBuffer(3)
        for i in range(5):
            buf.push([i], 0, float(i), [i])
        assert len(buf) == 3
        assert [t[2] for t in buf] == [2.0, 3.0, 4.0]

    @settings(max_examples=50)
    @given(st.integers(1, 20), st.integers(0, 60))
    def test_bounded(self, cap, n):
        buf = ReplayBuffer(cap)
        for i in range(n):
            buf.push([i], 0, 0.0, [i])
        assert len(buf) == min(cap, n)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"gamma": 1.0}, {"gamma": -0.1}, {"eps_decay": 0.0}, {"eps_decay": 1.1}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            AgentConfig(**kw)

    def test_epsilon_non_increasing(self):
        cfg = AgentConfig()
        eps = [cfg.epsilon(e) for e in range(1000)]
        assert eps[0] == 1.0
        assert all(a >= b for a, b in zip(eps, eps[1:]))
        assert eps[-1] == cfg.eps_min


class TestWeights:
    def test_round_trip(self, tmp_path):
        net = QNet((5, 7, 3), np.random.default_rng(4))
        save_weights(net, tmp_path / "w.bin", seed=9, steps=12)
        back, header = load_weights(tmp_path / "w.bin")
        assert back.sizes == net.sizes
        assert header["seed"] == 9 and header["steps"] == 12
        assert all(np.array_equal(p, q) for p, q in zip(back.params, net.params))

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x.bin").write_bytes(b"nope" + bytes(20))
        with pytest.raises(ValueError):
            load_weights(tmp_path / "x.bin")

    def test_truncated(self, tmp_path):
        save_weights(QNet((2, 2)), tmp_path / "w.bin")
        data = (tmp_path / "w.bin").read_bytes()
        (tmp_path / "w.bin").write_bytes(data[:-8])
        with pytest.raises(ValueError):
            load_weights(tmp_path / "w.bin")


def test_short_bandit_run_learns():
    env = ContextualBandit(n_actions=3, dim=4, noise=0.2, seed=0)
    cfg = AgentConfig(hidden=(32,), lr=0.01, eps_decay=0.9, target_sync_period=10)
    agent = Agent(4, 3, cfg, seed=0)
    rng = np.random.default_rng(1)
    curve = train(env, agent, rng, episodes=30, episode_len=40)
    assert len(curve) == 30 and agent.main.is_finite()
    assert greedy_accuracy(agent.main, env, 300, np.random.default_rng(2)) > 0.8
