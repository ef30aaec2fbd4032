"""Simulation core: configuration, seeded random streams and the event queue.

Time is continuous for channel deliveries; agents act only at integer
decision epochs ``t * dt``. Everything that happens between two epochs is
driven by a single :class:`EventQueue`.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import heapq
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

__all__ = [
    "ConfigError",
    "SimConfig",
    "build_config",
    "load_config",
    "Stream",
    "RngStreams",
    "sample_exp",
    "EventKind",
    "Event",
    "EventQueue",
]


class ConfigError(ValueError):
    """Raised for invalid or unknown configuration keys."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class SimConfig:
    """All system parameters of one experiment.

    Defaults follow the evaluation setup: half as many paths as agents,
    both channel rates 1.5, unit epochs, 50-epoch episodes, 100 particles,
    100 Monte Carlo runs, 16 AoI levels and a unit drop penalty.
    """

    n_agents: int = 100
    kappa: float = 0.5
    lambda1: float = 1.5
    lambda2: float = 1.5
    dt: float = 1.0
    horizon: int = 50
    eval_horizon: int = 50
    n_particles: int = 100
    n_runs: int = 100
    levels: int = 16
    drop_penalty: float = 1.0
    seed: int = 0
    # forward rate assumed by the particle filter; None means lambda1
    filter_lambda1: float | None = None

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def n_paths(self) -> int:
        # small epsilon guards against values such as 0.57 * 100 = 56.999...
        return int(math.floor(self.kappa * self.n_agents + 1e-9))

    @property
    def belief_lambda1(self) -> float:
        return self.lambda1 if self.filter_lambda1 is None else self.filter_lambda1

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Short stable hash of the configuration (seed excluded)."""
        doc = self.to_dict()
        doc.pop("seed")
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


_ALIASES = {
    "N": "n_agents",
    "kappa": "kappa",
    "κ": "kappa",
    "lambda1": "lambda1",
    "λ1": "lambda1",
    "lambda2": "lambda2",
    "λ2": "lambda2",
    "dt": "dt",
    "Δt": "dt",
    "T": "horizon",
    "T_e": "eval_horizon",
    "P": "n_particles",
    "S": "n_runs",
    "q": "levels",
    "D": "drop_penalty",
}
_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}
_INT_FIELDS = {"n_agents", "horizon", "eval_horizon", "n_particles", "n_runs", "levels", "seed"}


def _validate(cfg: SimConfig) -> None:
    for name in _INT_FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ConfigError(name, f"must be an integer, got {value!r}")
    if cfg.n_agents < 1:
        raise ConfigError("n_agents", "N must be ≥ 1")
    if not 0.0 < cfg.kappa <= 1.0:
        raise ConfigError("kappa", f"κ must lie in (0, 1], got {cfg.kappa}")
    for name in ("lambda1", "lambda2", "dt"):
        if not getattr(cfg, name) > 0.0:
            raise ConfigError(name, f"must be > 0, got {getattr(cfg, name)}")
    if cfg.filter_lambda1 is not None and not cfg.filter_lambda1 > 0.0:
        raise ConfigError("filter_lambda1", "must be > 0")
    for name in ("horizon", "eval_horizon", "n_particles", "n_runs"):
        if getattr(cfg, name) < 1:
            raise ConfigError(name, "must be ≥ 1")
    if cfg.levels < 2:
        raise ConfigError("levels", "q must be ≥ 2")
    if cfg.drop_penalty < 0.0:
        raise ConfigError("drop_penalty", "must be ≥ 0")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    if cfg.n_paths < 1:
        raise ConfigError("kappa", f"⌊κN⌋ = 0 paths for N={cfg.n_agents}, κ={cfg.kappa}")


def build_config(raw: Mapping[str, Any] | None = None, **overrides: Any) -> SimConfig:
    """Validate a key/value document and fill in defaults.

    Both field names (``n_agents``) and the short symbols (``N``, ``κ``,
    ``T_e`` ...) are accepted. ``C`` is derived from ``N`` and ``κ`` and may
    not be set.
    """
    values: dict[str, Any] = {}
    for key, value in {**(raw or {}), **overrides}.items():
        name = _ALIASES.get(key, key)
        if key == "C":
            raise ConfigError("C", "number of paths is derived as ⌊κN⌋ and cannot be set")
        if name not in _FIELDS:
            raise ConfigError(key, "unknown configuration key")
        if name in values:
            raise ConfigError(key, "given more than once")
        values[name] = value
    for name in ("kappa", "lambda1", "lambda2", "dt", "drop_penalty"):
        if name in values:
            try:
                values[name] = float(values[name])
            except (TypeError, ValueError):
                raise ConfigError(name, f"must be a number, got {values[name]!r}") from None
    return SimConfig(**values)


def load_config(path: str, **overrides: Any) -> SimConfig:
    """Read a JSON configuration file; ``overrides`` win over file values."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config", f"{path} must hold a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return build_config(raw)


class Stream(enum.IntEnum):
    """Consumer kinds; the first word of every substream key."""

    C1_DELAY = 0
    C2_DELAY = 1
    ADMISSION = 2
    POLICY = 3
    FILTER = 4
    TRAINER = 5


class RngStreams:
    """Independent generators derived from one seed.

    The substream for ``(kind, *indices)`` is
    ``SeedSequence(seed, spawn_key=(kind, *indices))``, so a draw sequence
    depends only on the seed and the key, never on creation order.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def get(self, kind: Stream, *indices: int) -> np.random.Generator:
        key = (int(kind),) + tuple(int(i) for i in indices)
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))


def sample_exp(stream: np.random.Generator, rate: float, size: int | None = None):
    """Exponential delay(s) with the given rate (mean ``1 / rate``).

    A zero draw has probability ~2^-53; it is bumped to the smallest
    positive float so delays are strictly positive.
    """
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    d = stream.exponential(1.0 / rate, size)
    return np.maximum(d, np.finfo(float).tiny) if size is not None else max(d, np.finfo(float).tiny)


class EventKind(enum.IntEnum):
    FORWARD_DELIVERY = 0
    REVERSE_DELIVERY = 1
    EPOCH_BOUNDARY = 2


@dataclass(frozen=True, slots=True)
class Event:
    time: float
    kind: EventKind
    payload: Any = None


class EventQueue:
    """Min-heap of events ordered by ``(time, insertion sequence)``."""

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = 0
        self.now = 0.0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, event: Event) -> None:
        if event.time < self.now:
            raise ValueError(f"cannot schedule event at t={event.time} before clock {self.now}")
        heapq.heappush(self._heap, (event.time, self._seq, event))
        self._seq += 1

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf

    def next(self) -> Event:
        if not self._heap:
            raise IndexError("event queue is empty")
        time, _, event = heapq.heappop(self._heap)
        self.now = time
        return event
