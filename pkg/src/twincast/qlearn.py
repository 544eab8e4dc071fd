"""Double-Q agent that picks the number of multicast groups.

A plain numpy MLP with ReLU hidden layers, trained by gradient descent on
the squared error to double-DQN targets: the main net chooses the next
action and the target net scores it.
"""

from __future__ import annotations

import json
import struct
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HIDDEN = (512, 256, 128, 64)


class QNet:
    """Fully connected ReLU network with a linear output layer."""

    def __init__(self, sizes, rng: np.random.Generator | None = None):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError("need at least an input and an output width")
        self.sizes = sizes
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.params.append(np.zeros(fan_out))

    @classmethod
    def for_task(cls, n_inputs: int, n_actions: int, hidden=HIDDEN, rng=None) -> "QNet":
        return cls((n_inputs, *hidden, n_actions), rng)

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    def _forward(self, x):
        acts = [x]
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            z = acts[-1] @ W + b
            acts.append(np.maximum(z, 0.0) if i < n_layers - 1 else z)
        return acts

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.n_inputs:
            raise ValueError(f"state width {x.shape[1]} != network input {self.n_inputs}")
        q = self._forward(x)[-1]
        return q[0] if single else q

    __call__ = forward

    def loss_and_grads(self, states, actions, targets):
        """Mean squared error on the taken actions and its parameter gradients."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        actions = np.asarray(actions, dtype=np.int64)
        targets = np.asarray(targets, dtype=float)
        acts = self._forward(states)
        q = acts[-1]
        rows = np.arange(states.shape[0])
        resid = q[rows, actions] - targets
        loss = float(np.mean(resid ** 2))
        delta = np.zeros_like(q)
        delta[rows, actions] = 2.0 * resid / states.shape[0]
        grads = [None] * len(self.params)
        for i in reversed(range(len(self.params) // 2)):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.params[2 * i].T) * (acts[i] > 0)
        return loss, grads

    def apply_gradients(self, grads, lr: float) -> None:
        for p, g in zip(self.params, grads):
            p -= lr * g

    def copy_from(self, other: "QNet") -> None:
        if other.sizes != self.sizes:
            raise ValueError("network shapes differ")
        self.params = [p.copy() for p in other.params]

    def clone(self) -> "QNet":
        net = QNet.__new__(QNet)
        net.sizes = self.sizes
        net.params = [p.copy() for p in self.params]
        return net

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params)


class ReplayBuffer:
    """FIFO store of (s, a, r, s', done) transitions; ``a`` is a 0-based index."""

    def __init__(self, capacity: int = 2000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def push(self, s, a: int, r: float, s_next, done: bool = False) -> None:
        self._items.append((np.asarray(s, dtype=float), int(a), float(r),
                            np.asarray(s_next, dtype=float), bool(done)))

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.choice(len(self._items), size=batch, replace=False)
        picked = [self._items[i] for i in idx]
        s, a, r, s2, d = zip(*picked)
        return np.stack(s), np.array(a), np.array(r), np.stack(s2), np.array(d, dtype=float)


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.95
    lr: float = 0.001
    batch: int = 32
    episodes: int = 300
    episode_len: int = 90
    eps0: float = 1.0
    eps_decay: float = 0.995
    eps_min: float = 0.05
    target_sync_period: int = 50
    buffer_capacity: int = 2000
    hidden: tuple = HIDDEN

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.eps_decay <= 1.0:
            raise ValueError("eps_decay must lie in (0, 1]")
        if self.batch < 1 or self.target_sync_period < 1:
            raise ValueError("batch and target_sync_period must be positive")

    def epsilon(self, episode: int) -> float:
        return max(self.eps_min, self.eps0 * self.eps_decay ** episode)


def select_action(net: QNet, state, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy action in 1..n_actions; greedy ties go to the smallest."""
    n = net.n_actions
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(n)) + 1
    return int(np.argmax(net.forward(state))) + 1


def ddqn_target(r, gamma: float, s_next, main: QNet, target: QNet, done=0.0):
    """r + gamma * Q_target(s', argmax_a Q_main(s', a)); terminal transitions stop at r."""
    s_next = np.atleast_2d(np.asarray(s_next, dtype=float))
    a_star = np.argmax(main.forward(s_next), axis=1)
    q_next = target.forward(s_next)[np.arange(s_next.shape[0]), a_star]
    y = np.asarray(r, dtype=float) + gamma * (1.0 - np.asarray(done, dtype=float)) * q_next
    return float(y[0]) if y.size == 1 and np.ndim(r) == 0 else y


def train_step(main: QNet, target: QNet, buffer: ReplayBuffer, cfg: AgentConfig,
               rng: np.random.Generator):
    """One descent step on a sampled batch; None when the buffer is too small."""
    if len(buffer) < cfg.batch:
        return None
    s, a, r, s2, done = buffer.sample(cfg.batch, rng)
    y = ddqn_target(r, cfg.gamma, s2, main, target, done)
    loss, grads = main.loss_and_grads(s, a, y)
    main.apply_gradients(grads, cfg.lr)
    return loss


def sync_target(main: QNet, target: QNet) -> QNet:
    target.copy_from(main)
    return target


class Agent:
    def __init__(self, n_inputs: int, n_actions: int, cfg: AgentConfig = AgentConfig(),
                 rng: np.random.Generator | None = None, seed: int = 0):
        rng = rng if rng is not None else np.random.default_rng(seed)
        self.cfg = cfg
        self.seed = seed
        self.main = QNet.for_task(n_inputs, n_actions, cfg.hidden, rng)
        self.target = self.main.clone()
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.steps = 0

    def act(self, state, eps: float, rng: np.random.Generator) -> int:
        return select_action(self.main, state, eps, rng)

    def observe(self, s, action: int, r: float, s_next, done: bool) -> None:
        self.buffer.push(s, action - 1, r, s_next, done)

    def learn(self, rng: np.random.Generator):
        loss = train_step(self.main, self.target, self.buffer, self.cfg, rng)
        if loss is not None:
            self.steps += 1
            if self.steps % self.cfg.target_sync_period == 0:
                sync_target(self.main, self.target)
        return loss


class ContextualBandit:
    """Noisy prototype states; the best action is the prototype's index.

    Reward is 1 for the right action and 0 otherwise.  Every step is
    terminal, so the targets reduce to the immediate reward.
    """

    def __init__(self, n_actions: int = 10, dim: int = 16, noise: float = 0.3, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.n_actions = n_actions
        self.dim = dim
        self.noise = noise
        self.prototypes = rng.normal(size=(n_actions, dim))
        self._label = 0

    def sample(self, rng: np.random.Generator):
        k = int(rng.integers(self.n_actions))
        return self.prototypes[k] + self.noise * rng.normal(size=self.dim), k + 1

    def reset(self, rng: np.random.Generator):
        state, self._label = self.sample(rng)
        return state

    def step(self, action: int, rng: np.random.Generator):
        reward = 1.0 if action == self._label else 0.0
        nxt = self.reset(rng)
        return reward, nxt, True


def train(env, agent: Agent, rng: np.random.Generator, episodes: int | None = None,
          episode_len: int | None = None) -> list[float]:
    """Epsilon-greedy training loop; returns the mean reward of each episode."""
    cfg = agent.cfg
    episodes = cfg.episodes if episodes is None else episodes
    episode_len = cfg.episode_len if episode_len is None else episode_len
    curve = []
    for ep in range(episodes):
        eps = cfg.epsilon(ep)
        state = env.reset(rng)
        total = 0.0
        for _ in range(episode_len):
            action = agent.act(state, eps, rng)
            reward, nxt, done = env.step(action, rng)
            agent.observe(state, action, reward, nxt, done)
            agent.learn(rng)
            total += reward
            state = nxt
        curve.append(total / episode_len)
    return curve


def greedy_accuracy(net: QNet, env: ContextualBandit, n_states: int, rng: np.random.Generator) -> float:
    hits = 0
    for _ in range(n_states):
        state, best = env.sample(rng)
        hits += int(np.argmax(net.forward(state))) + 1 == best
    return hits / n_states


# ---------------------------------------------------------------- weights file

_MAGIC = b"TWQN"
_VERSION = 1


def save_weights(net: QNet, path, seed: int = 0, steps: int = 0) -> None:
    header = json.dumps({"sizes": list(net.sizes), "seed": seed, "steps": steps},
                        sort_keys=True).encode("utf-8")
    flat = np.concatenate([p.ravel() for p in net.params]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(header)))
        fh.write(header)
        fh.write(flat.tobytes())


def load_weights(path) -> tuple[QNet, dict]:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a weights file")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported weights version {version}")
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    flat = np.frombuffer(data[12 + hlen:], dtype="<f8")
    net = QNet(header["sizes"])
    expected = sum(p.size for p in net.params)
    if flat.size != expected:
        raise ValueError(f"{path}: expected {expected} weights, found {flat.size}")
    offset = 0
    for i, p in enumerate(net.params):
        net.params[i] = flat[offset:offset + p.size].reshape(p.shape).astype(float)
        offset += p.size
    return net, header
