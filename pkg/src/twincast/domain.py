"""Core types, configuration and seeded random streams.

Units used throughout the package are SI: bandwidth in Hz, data in bits,
compute in cycles, time in seconds.  Swipe timestamps are integer seconds
``1..L`` and map to array column ``e - 1``; video types are 0-based array
indices.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

DEMAND_MODES = ("literal", "dimensional")
SWIPE_AGGREGATIONS = ("mean", "sum")

# Keys every config file must carry (the published simulation table).
TABLE_KEYS = (
    "M", "B", "N", "omega", "mu", "T", "K", "V", "C", "rho", "F1", "F2",
    "lambda", "lambda_tilde", "varpi1", "varpi2", "varpi3", "varpi4",
    "delta1", "delta2", "delta3",
)

# file key -> dataclass attribute, where they differ
_FILE_TO_ATTR = {"lambda": "lam"}
_ATTR_TO_FILE = {v: k for k, v in _FILE_TO_ATTR.items()}


@dataclass(frozen=True)
class SystemConfig:
    M: int = 15                 # bandwidth units
    B: float = 2e6              # Hz per unit
    N: int = 10                 # VM instances
    omega: float = 2e9          # cycles/s per VM
    mu: float = 2e3             # cycles/bit (2 Gcycle/Mb)
    T: float = 300.0            # window length, s
    K: int = 60
    V: int = 1000
    C: int = 8
    rho: int = 50
    F1: int = 150
    F2: int = 5
    lam: float = 0.4
    lambda_tilde: float = 0.3
    varpi1: float = 0.5
    varpi2: float = 0.5
    varpi3: float = 0.7
    varpi4: float = 1.0
    delta1: float = 1.5
    delta2: float = 0.3
    delta3: float = 0.3
    demand_mode: str = "dimensional"
    max_clusters: int = 10
    swipe_aggregation: str = "mean"
    video_length: int = 15
    max_layer: int = 3

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    @property
    def varpi(self) -> tuple[float, float, float, float]:
        return (self.varpi1, self.varpi2, self.varpi3, self.varpi4)

    @property
    def deltas(self) -> tuple[float, float, float]:
        return (self.delta1, self.delta2, self.delta3)


_INT_FIELDS = ("M", "N", "K", "V", "C", "rho", "F1", "F2", "max_clusters",
               "video_length", "max_layer")
_POSITIVE_REALS = ("B", "omega", "mu", "T", "varpi1", "varpi2", "varpi3",
                   "varpi4", "delta1", "delta2", "delta3")


def validate_config(cfg: SystemConfig) -> list[str]:
    """Return every violated invariant; an empty list means the config is valid."""
    errors = []
    for name in _INT_FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
            errors.append(f"{name}: must be a positive integer (got {value!r})")
    for name in _POSITIVE_REALS:
        value = getattr(cfg, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
            errors.append(f"{name}: must be > 0 (got {value!r})")
    for name, file_key in (("lam", "lambda"), ("lambda_tilde", "lambda_tilde")):
        value = getattr(cfg, name)
        if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
            errors.append(f"{file_key}: must satisfy {file_key} ∈ [0,1] (got {value!r})")
    if isinstance(cfg.rho, int) and isinstance(cfg.V, int) and cfg.rho > cfg.V:
        errors.append(f"rho: must satisfy rho ≤ V (got rho={cfg.rho}, V={cfg.V})")
    if cfg.demand_mode not in DEMAND_MODES:
        errors.append(f"demand_mode: must be one of {DEMAND_MODES} (got {cfg.demand_mode!r})")
    if cfg.swipe_aggregation not in SWIPE_AGGREGATIONS:
        errors.append(
            f"swipe_aggregation: must be one of {SWIPE_AGGREGATIONS} (got {cfg.swipe_aggregation!r})")
    return errors


class ConfigError(ValueError):
    """Malformed or invalid configuration text."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def dumps_config(cfg: SystemConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        text = repr(float(value)) if isinstance(value, float) else str(value)
        lines.append(f"{_ATTR_TO_FILE.get(f.name, f.name)} = {text}")
    return "\n".join(lines) + "\n"


def loads_config(text: str) -> SystemConfig:
    """Parse ``key = value`` lines.  Unknown or duplicate keys are rejected,
    as is a file missing any of the table parameters."""
    types = {f.name: f.type for f in fields(SystemConfig)}
    defaults = SystemConfig()
    seen: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        attr = _FILE_TO_ATTR.get(key, key)
        if attr not in types:
            raise ConfigError(f"unknown key {key!r}", key)
        if attr in seen:
            raise ConfigError(f"duplicate key {key!r}", key)
        default = getattr(defaults, attr)
        try:
            if isinstance(default, str):
                seen[attr] = value
            elif isinstance(default, int):
                seen[attr] = int(value)
            else:
                seen[attr] = float(value)
        except ValueError:
            raise ConfigError(f"key {key!r}: cannot parse {value!r}", key) from None
    missing = [k for k in TABLE_KEYS if _FILE_TO_ATTR.get(k, k) not in seen]
    if missing:
        raise ConfigError(f"missing key {missing[0]!r}", missing[0])
    cfg = SystemConfig(**seen)
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors[0], errors[0].split(":", 1)[0])
    return cfg


def load_config(path: str | Path) -> SystemConfig:
    return loads_config(Path(path).read_text(encoding="utf-8"))


def save_config(cfg: SystemConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_config(cfg), encoding="utf-8")


# Stream order is part of the reproducibility contract: never reorder.
STREAMS = ("workload", "agent", "clustering")


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """Split one 64-bit seed into independent generators, one per subsystem.

    Children are spawned from ``SeedSequence(seed)`` in the fixed order of
    ``STREAMS``, so adding a consumer to one subsystem never perturbs the
    draws of another.
    """
    children = np.random.SeedSequence(seed & 0xFFFFFFFFFFFFFFFF).spawn(len(STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, children)}


@dataclass
class VideoCatalog:
    """Typed videos with popularity and per-second layered segment sizes.

    ``sizes[v, l, e-1]`` is the size in bits of layer ``l`` (0 = base) of
    video ``v`` at second ``e``.
    """

    types: np.ndarray         # (V,) int, 0-based type index
    popularity: np.ndarray    # (V,) float, >= 0
    sizes: np.ndarray         # (V, L_max + 1, L) float, bits

    def __post_init__(self):
        if np.any(self.sizes <= 0):
            raise ValueError("layer sizes must be positive")
        if np.any(self.popularity < 0):
            raise ValueError("popularity must be nonnegative")

    @property
    def n_videos(self) -> int:
        return int(self.types.shape[0])

    @property
    def length(self) -> int:
        return int(self.sizes.shape[2])

    @property
    def max_layer(self) -> int:
        return int(self.sizes.shape[1]) - 1


@dataclass(frozen=True)
class ReservationDecision:
    m: tuple[int, ...]
    n: tuple[int, ...]
    stats: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.m) != len(self.n):
            raise ValueError("m and n must cover the same groups")
        if any(x < 0 for x in self.m) or any(x < 0 for x in self.n):
            raise ValueError("reservations must be nonnegative")

    def feasible(self, M: int, N: int) -> bool:
        return sum(self.m) <= M and sum(self.n) <= N
