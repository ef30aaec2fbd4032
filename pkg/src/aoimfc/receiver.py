"""Receiver side: the true AoI sawtooth of every agent."""

from __future__ import annotations

import numpy as np

from .channel import Ack, Message

__all__ = ["ReceiverState"]


class ReceiverState:
    """Latest applied send time per agent plus the log of fresh updates.

    The AoI of agent ``n`` at time ``t`` is ``t - latest[n]``; ``latest``
    starts at 0, i.e. every agent has AoI 0 at ``t = 0``. Freshness is decided
    by message index (indices start at 1 and grow with send time), so a
    message sent at ``t = 0`` still counts as fresh.
    """

    def __init__(self, n_agents: int):
        self.latest = np.zeros(n_agents)
        self.last_index = np.zeros(n_agents, dtype=np.int64)
        self.last_event = np.zeros(n_agents)
        self.updates: list[list[tuple[float, float]]] = [[] for _ in range(n_agents)]
        self.stale = np.zeros(n_agents, dtype=np.int64)

    @property
    def n_agents(self) -> int:
        return len(self.latest)

    def on_message(self, msg: Message, arrival: float) -> Ack | None:
        """Apply an arriving message; return the ack if it was fresh."""
        if arrival < msg.send_time:
            raise RuntimeError(f"message {msg} arrived at {arrival} before it was sent")
        n = msg.agent
        self.last_event[n] = max(self.last_event[n], arrival)
        if msg.index <= self.last_index[n]:
            self.stale[n] += 1
            return None
        self.last_index[n] = msg.index
        self.latest[n] = msg.send_time
        z = arrival - msg.send_time
        self.updates[n].append((arrival, z))
        return Ack(n, msg.index, z, arrival)

    def true_aoi(self, n: int, t: float) -> float:
        return t - self.latest[n]

    def aoi(self, t: float) -> np.ndarray:
        """AoI of all agents at time ``t``."""
        return t - self.latest
