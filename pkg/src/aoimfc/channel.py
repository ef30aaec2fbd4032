"""Finite-capacity multipath channels with exponential per-path delays.

A channel has ``C`` anonymous paths. Each path carries one payload at a
time and releases it after an exponential delay, so deliveries can
complete out of entry order. There is no queue: a payload that meets a
full channel is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = ["Message", "Ack", "ChannelState", "InFlight"]


@dataclass(frozen=True, slots=True)
class Message:
    agent: int
    index: int
    send_time: float


@dataclass(frozen=True, slots=True)
class Ack:
    """Receiver acknowledgement of a fresh message.

    ``aoi`` is the updated AoI ``z`` and ``update_time`` the receiver update
    time ``η``; ``index`` names the acknowledged message so the sender can
    match it against its send log.
    """

    agent: int
    index: int
    aoi: float
    update_time: float


@dataclass(frozen=True, slots=True)
class InFlight:
    key: int
    payload: Message | Ack
    entry_time: float
    delivery_time: float


class ChannelState:
    """Occupancy, in-flight payloads and drop bookkeeping of one channel.

    Parameters
    ----------
    capacity : int
        Number of paths ``C``.
    delay : callable
        Zero-argument function returning one path delay. The simulator
        passes a seeded exponential sampler; tests may script delays.
    """

    def __init__(self, capacity: int, delay: Callable[[], float]):
        if capacity < 1:
            raise ValueError("channel needs at least one path")
        self.capacity = int(capacity)
        self._delay = delay
        self._in_flight: dict[int, InFlight] = {}
        self._next_key = 0
        self.drops = 0
        self.admitted_total = 0

    @property
    def occupied(self) -> int:
        return len(self._in_flight)

    @property
    def free(self) -> int:
        return self.capacity - len(self._in_flight)

    def load(self) -> float:
        """Ratio of occupied paths."""
        return len(self._in_flight) / self.capacity

    def in_flight(self) -> list[InFlight]:
        return list(self._in_flight.values())

    def _enter(self, payload: Message | Ack, now: float) -> InFlight:
        d = float(self._delay())
        if not d > 0.0:
            raise ValueError(f"path delay must be positive, got {d}")
        item = InFlight(self._next_key, payload, now, now + d)
        self._in_flight[item.key] = item
        self._next_key += 1
        self.admitted_total += 1
        return item

    def admit_epoch(
        self, incoming: Sequence[Message], stream: np.random.Generator, now: float
    ) -> tuple[list[InFlight], list[Message]]:
        """Admit a uniformly random subset of this epoch's messages.

        The lottery shuffles ``incoming`` and keeps the first ``free``
        entries. Delays are drawn in admitted order. Returns the admitted
        in-flight records and the dropped messages (in input order).
        """
        free = self.free
        if len(incoming) <= free:
            chosen = list(range(len(incoming)))
        elif free == 0:
            chosen = []
        else:
            chosen = sorted(stream.permutation(len(incoming))[:free].tolist())
        keep = set(chosen)
        admitted = [self._enter(incoming[i], now) for i in chosen]
        dropped = [m for i, m in enumerate(incoming) if i not in keep]
        self.drops += len(dropped)
        return admitted, dropped

    def admit_ack(self, ack: Ack, now: float) -> InFlight | None:
        """Place an ack on a free path, or drop and count it."""
        if self.free == 0:
            self.drops += 1
            return None
        return self._enter(ack, now)

    def deliver(self, item: InFlight) -> Message | Ack:
        """Release the payload of a scheduled delivery and free its path."""
        try:
            del self._in_flight[item.key]
        except KeyError:
            raise RuntimeError(f"delivery of unknown payload {item.payload!r}") from None
        return item.payload
