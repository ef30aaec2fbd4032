"""Agent-side knowledge: send log, unacknowledged count and AoI belief.

The particle filter tracks, per particle, the latest send time that has
reached the receiver in that particle's simulated world; the particle's
AoI at time ``t`` is ``t`` minus that value. With noise-free
acknowledgements the likelihood is a Dirac, so an ack is absorbed by
resetting every particle exactly onto the acknowledged value and
re-simulating forward. Weights therefore stay uniform and no resampling
step exists.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Ack

__all__ = [
    "quantize",
    "quantize_array",
    "BeliefSummary",
    "DelayEstimate",
    "estimate_lambda2",
    "ParticleFilter",
    "SendStatus",
    "AgentState",
]


def quantize(x: float, q: int) -> int:
    """AoI level ``min(floor(x), q - 1)``; the top level is unbounded."""
    if x < 0:
        raise ValueError(f"AoI must be non-negative, got {x}")
    return min(int(math.floor(x)), q - 1)


def quantize_array(x: np.ndarray, q: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("AoI must be non-negative")
    return np.minimum(np.floor(x), q - 1).astype(np.int64)


@dataclass(frozen=True)
class BeliefSummary:
    mean: float
    std: float


@dataclass
class DelayEstimate:
    """Observed reverse-channel delays ``η' - η`` of received acks."""

    samples: list[float] = field(default_factory=list)

    def add(self, delay: float) -> None:
        self.samples.append(delay)

    def rate(self) -> float | None:
        return estimate_lambda2(self)


def estimate_lambda2(est: DelayEstimate) -> float | None:
    """Maximum-likelihood exponential rate, or None without samples."""
    if not est.samples:
        return None
    return len(est.samples) / math.fsum(est.samples)


class ParticleFilter:
    """Bootstrap filter over one agent's AoI.

    Every admitted message becomes a candidate delivery in each particle,
    with its own exponential delay drawn once per particle. After a reset at
    receiver time ``rho`` a candidate still in play starts its delay at
    ``max(rho, send_time)``: the ack proves it had not arrived before ``rho``
    and the exponential is memoryless. Reusing the original draw keeps the
    particle state a function of the dominating ack only, so the order in
    which acks arrive does not matter.
    """

    def __init__(self, n_particles: int, rate: float, stream, t0: float = 0.0):
        self.n_particles = int(n_particles)
        self.rate = float(rate)
        self._stream = stream
        self.time = t0
        self.origin = t0
        self.base = np.zeros(self.n_particles)
        self._index: list[int] = []
        self._tau = np.empty(0)
        self._start = np.empty(0)
        self._delay = np.empty((self.n_particles, 0))

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.n_particles, 1.0 / self.n_particles)

    def _draw(self) -> np.ndarray:
        d = np.asarray(self._stream.exponential(1.0 / self.rate, self.n_particles), dtype=float)
        return np.maximum(d, np.finfo(float).tiny)

    def add_message(self, index: int, send_time: float) -> np.ndarray:
        """Register an admitted message; returns its per-particle deliveries."""
        d = self._draw()
        self._index.append(index)
        self._tau = np.append(self._tau, send_time)
        self._start = np.append(self._start, send_time)
        self._delay = np.column_stack([self._delay, d])
        return send_time + d

    def schedule(self) -> dict[int, np.ndarray]:
        """Pending candidate deliveries, message index -> per-particle times."""
        deliveries = self._start + self._delay
        return {m: deliveries[:, j].copy() for j, m in enumerate(self._index)}

    def _effective_base(self, t: float) -> np.ndarray:
        if not self._index:
            return self.base
        arrived = (self._start + self._delay) <= t
        tau = np.where(arrived, self._tau, -np.inf).max(axis=1)
        return np.maximum(self.base, tau)

    def advance(self, t: float) -> None:
        """Move the filter clock to ``t``.

        Candidates are kept even once every particle has applied them: a
        later ack for an older message can still prove they had not arrived.
        """
        if t < self.time:
            raise ValueError(f"cannot advance filter from {self.time} back to {t}")
        self.time = t

    def _keep(self, keep: np.ndarray) -> None:
        self._index = [m for m, k in zip(self._index, keep) if k]
        self._tau = self._tau[keep]
        self._start = self._start[keep]
        self._delay = self._delay[:, keep]

    def reset(self, rho: float, acked_send_time: float, now: float) -> None:
        """Pin every particle to the acked value at ``rho``, re-simulate to ``now``."""
        if now < rho:
            raise ValueError("ack cannot be received before it was sent")
        self.base = np.full(self.n_particles, acked_send_time)
        if self._index:
            self._keep(self._tau > acked_send_time)
            self._start = np.maximum(rho, self._tau)
        self.time = self.origin = rho
        self.advance(max(now, self.time))

    def values(self, t: float | None = None) -> np.ndarray:
        """Particle AoI values at ``t`` (default: filter clock).

        Any time since the last reset can be queried; the trajectories
        before it were discarded by that reset.
        """
        t = self.time if t is None else t
        if t < self.origin:
            raise ValueError(f"trajectories before the last reset at {self.origin} are gone")
        return t - self._effective_base(t)

    def summary(self, t: float | None = None) -> BeliefSummary:
        x = self.values(t)
        return BeliefSummary(float(x.mean()), float(x.std()))


class SendStatus(enum.Enum):
    IN_FLIGHT = "in-flight"
    DROPPED = "dropped"
    ACKNOWLEDGED = "acknowledged"


class AgentState:
    """What one sensor knows about its own messages.

    ``unacked`` counts admitted messages minus received acks. Messages that
    arrived stale or whose ack was lost never leave this count; the agent
    cannot tell them apart from messages still in flight.
    """

    def __init__(self, index: int, belief: ParticleFilter | None = None):
        self.index = index
        self.belief = belief
        self.sends: dict[int, list] = {}
        self.unacked = 0
        self.observed_load = 0.0
        self.last_admitted: float | None = None
        self.ack_log: list[tuple[float, float, float]] = []
        self.history: list[tuple[float, float]] = []
        self.latest_rho = -math.inf
        self._latest_index = 0
        self.delays = DelayEstimate()

    def on_send(self, index: int, send_time: float, admitted: bool, load: float) -> None:
        self.observed_load = load
        if index in self.sends:
            raise ValueError(f"message index {index} sent twice by agent {self.index}")
        if not admitted:
            self.sends[index] = [send_time, SendStatus.DROPPED]
            return
        self.sends[index] = [send_time, SendStatus.IN_FLIGHT]
        self.unacked += 1
        self.last_admitted = send_time
        if self.belief is not None:
            self.belief.advance(max(self.belief.time, send_time))
            self.belief.add_message(index, send_time)

    def on_ack(self, ack: Ack, received_at: float) -> bool:
        """Absorb an ack; returns True when it moved the particle filter."""
        entry = self.sends.get(ack.index)
        if entry is None or entry[1] is not SendStatus.IN_FLIGHT:
            raise ValueError(f"agent {self.index}: ack for unknown or settled message {ack.index}")
        entry[1] = SendStatus.ACKNOWLEDGED
        self.unacked -= 1
        self.delays.add(received_at - ack.update_time)
        self.ack_log.append((ack.aoi, ack.update_time, received_at))
        bisect.insort(self.history, (ack.update_time, ack.aoi))
        # the receiver applies messages in index order, so the highest acked
        # index is also the latest update; keying on it settles ties in time
        if ack.index <= self._latest_index:
            return False
        self.latest_rho, self._latest_index = ack.update_time, ack.index
        if self.belief is not None:
            self.belief.reset(ack.update_time, entry[0], max(received_at, self.belief.time))
        return True

    def ackfree_estimate(self, t: float) -> float:
        """Time since the last admitted send (``t`` if none)."""
        return t if self.last_admitted is None else t - self.last_admitted
