"""Episode runner: agents, channels, receiver and filters on one event queue.

One epoch at time ``t * dt`` proceeds as

1. process every delivery up to the boundary (continuous time),
2. record the population AoI, load and cumulative drops at the boundary,
3. agents pick actions, new messages go through the admission lottery,
4. senders register the outcome and the load they observed.

The record for epoch ``t`` therefore reflects the state at time ``t * dt``
before the epoch's own sends, so an idle population has average AoI ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .belief import AgentState, ParticleFilter, quantize_array
from .channel import Ack, ChannelState, InFlight, Message
from .core import Event, EventKind, EventQueue, RngStreams, SimConfig, Stream, sample_exp
from .policy import (
    ObsModel,
    PolicySpec,
    Snapshot,
    UpperPolicy,
    Variant,
    act_all,
    build_observation,
    evaluate_upper,
    fixed_act,
    obs_dim,
    reward,
    uses_belief,
)
from .receiver import ReceiverState

__all__ = ["EpisodeMetrics", "FilterTrace", "Simulation", "run_episode"]


@dataclass
class FilterTrace:
    """Per-epoch belief of one agent plus population snapshots."""

    agent: int
    t: np.ndarray
    true_aoi: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    acks: np.ndarray
    ackfree: np.ndarray
    # epoch -> (true AoI of all agents, belief mean of all agents)
    snapshots: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


@dataclass
class EpisodeMetrics:
    avg_aoi: np.ndarray
    cum_drops: np.ndarray
    load: np.ndarray
    rewards: np.ndarray
    c2_drops: int
    final_aoi: np.ndarray
    integrated_aoi: float
    belief_error: float | None = None
    ackfree_error: float | None = None
    trace: FilterTrace | None = None

    @property
    def time_avg_aoi(self) -> float:
        return float(self.avg_aoi.mean())

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())


class Simulation:
    """Mutable state of a single run. Not shared between runs.

    ``c1_delay`` / ``c2_delay`` replace the seeded exponential samplers,
    e.g. with scripted delays in tests.
    """

    def __init__(
        self,
        cfg: SimConfig,
        seed: int | None = None,
        *,
        beliefs: bool = False,
        c1_delay: Callable[[], float] | None = None,
        c2_delay: Callable[[], float] | None = None,
    ):
        self.cfg = cfg
        self.streams = RngStreams(cfg.seed if seed is None else seed)
        n = cfg.n_agents
        if c1_delay is None:
            g1 = self.streams.get(Stream.C1_DELAY)
            c1_delay = lambda: sample_exp(g1, cfg.lambda1)  # noqa: E731
        if c2_delay is None:
            g2 = self.streams.get(Stream.C2_DELAY)
            c2_delay = lambda: sample_exp(g2, cfg.lambda2)  # noqa: E731
        self.c1 = ChannelState(cfg.n_paths, c1_delay)
        self.c2 = ChannelState(cfg.n_paths, c2_delay)
        self.receiver = ReceiverState(n)
        self.queue = EventQueue()
        self.admission = self.streams.get(Stream.ADMISSION)
        self.policy_stream = self.streams.get(Stream.POLICY)
        self.beliefs = beliefs
        self.agents = [
            AgentState(
                i,
                ParticleFilter(cfg.n_particles, cfg.belief_lambda1, self.streams.get(Stream.FILTER, i))
                if beliefs
                else None,
            )
            for i in range(n)
        ]
        self.m1 = np.zeros(n, dtype=np.int64)
        self.m2 = np.zeros(n, dtype=np.int64)
        self.sent = np.zeros(n, dtype=np.int64)
        self.c1_drops = np.zeros(n, dtype=np.int64)
        self.lost_acks = np.zeros(n, dtype=np.int64)
        self.acks_received = np.zeros(n, dtype=np.int64)
        self.now = 0.0
        self._integral = 0.0
        self._latest_sum = 0.0

    # -- continuous-time part -------------------------------------------------

    def _integrate(self, t: float) -> None:
        n = self.cfg.n_agents
        self._integral += 0.5 * n * (t * t - self.now * self.now) - self._latest_sum * (t - self.now)
        self.now = t

    def run_until(self, t: float) -> None:
        """Process every event up to the epoch boundary at ``t``."""
        self.queue.schedule(Event(t, EventKind.EPOCH_BOUNDARY))
        while True:
            ev = self.queue.next()
            self._integrate(ev.time)
            if ev.kind is EventKind.EPOCH_BOUNDARY:
                return
            if ev.kind is EventKind.FORWARD_DELIVERY:
                self._on_forward(ev.payload, ev.time)
            else:
                self._on_reverse(ev.payload, ev.time)

    def _on_forward(self, item: InFlight, t: float) -> None:
        msg: Message = self.c1.deliver(item)
        n = msg.agent
        self.m1[n] -= 1
        old = self.receiver.latest[n]
        ack = self.receiver.on_message(msg, t)
        if ack is None:
            return
        self._latest_sum += self.receiver.latest[n] - old
        back = self.c2.admit_ack(ack, t)
        if back is None:
            self.lost_acks[n] += 1
            return
        self.m2[n] += 1
        self.queue.schedule(Event(back.delivery_time, EventKind.REVERSE_DELIVERY, back))

    def _on_reverse(self, item: InFlight, t: float) -> None:
        ack: Ack = self.c2.deliver(item)
        n = ack.agent
        self.m2[n] -= 1
        self.acks_received[n] += 1
        self.agents[n].on_ack(ack, t)

    # -- decision epochs ------------------------------------------------------

    def aoi(self) -> np.ndarray:
        return self.receiver.aoi(self.now)

    def belief_stats(self, particles: bool = False):
        """Per-agent belief mean and std at the current time (and particles)."""
        means = np.empty(self.cfg.n_agents)
        stds = np.empty(self.cfg.n_agents)
        parts = np.empty((self.cfg.n_agents, self.cfg.n_particles)) if particles else None
        for i, agent in enumerate(self.agents):
            agent.belief.advance(self.now)
            x = agent.belief.values(self.now)
            means[i] = x.mean()
            stds[i] = x.std()
            if particles:
                parts[i] = x
        return means, stds, parts

    def snapshot(self, particles: bool = False) -> Snapshot:
        snap = Snapshot(
            aoi=self.aoi(),
            m1=self.m1.astype(float),
            m2=self.m2.astype(float),
            unacked=np.array([a.unacked for a in self.agents], dtype=float),
            load=self.c1.load(),
            observed_load=np.array([a.observed_load for a in self.agents]),
        )
        if self.beliefs:
            snap.belief_mean, snap.belief_std, snap.particles = self.belief_stats(particles)
        return snap

    def send(self, actions: np.ndarray) -> int:
        """Generate messages for the acting agents and run admission.

        Returns the number of messages dropped at ``C1`` this epoch.
        """
        senders = np.flatnonzero(actions)
        if senders.size == 0:
            return 0
        msgs = []
        for n in senders:
            self.sent[n] += 1
            msgs.append(Message(int(n), int(self.sent[n]), self.now))
        admitted, dropped = self.c1.admit_epoch(msgs, self.admission, self.now)
        load = self.c1.load()
        outcome = {}
        for item in admitted:
            n = item.payload.agent
            self.m1[n] += 1
            self.queue.schedule(Event(item.delivery_time, EventKind.FORWARD_DELIVERY, item))
            outcome[n] = (item.payload, True)
        for msg in dropped:
            self.c1_drops[msg.agent] += 1
            outcome[msg.agent] = (msg, False)
        for n in sorted(outcome):
            msg, ok = outcome[n]
            self.agents[n].on_send(msg.index, msg.send_time, ok, load)
        return len(dropped)


def _decide(policy: PolicySpec, sim: Simulation, model: ObsModel, variant: Variant,
            snap: Snapshot, epoch: int) -> np.ndarray:
    if not isinstance(policy, UpperPolicy):
        return fixed_act(policy, snap.aoi, sim.policy_stream, epoch)
    obs = None if policy.kind == "static" else build_observation(model, variant, snap)
    rule = evaluate_upper(policy, obs)
    state = snap.belief_mean if uses_belief(model, variant) else snap.aoi
    return act_all(rule, quantize_array(np.maximum(state, 0.0), sim.cfg.levels), sim.policy_stream)


def run_episode(
    cfg: SimConfig,
    policy: PolicySpec,
    model: ObsModel | str | None = None,
    variant: Variant | str | None = None,
    seed: int | None = None,
    *,
    horizon: int | None = None,
    trace_agent: int | None = None,
    snapshot_times: Sequence[int] = (),
    belief_errors: bool = False,
    probes_per_epoch: int = 10,
    c1_delay: Callable[[], float] | None = None,
    c2_delay: Callable[[], float] | None = None,
) -> EpisodeMetrics:
    """Run epochs ``0 .. horizon`` (default ``cfg.eval_horizon``).

    ``model``/``variant`` default to those stored on an upper policy, else
    POMFC / true state. Particle filters run when the variant needs them,
    when a filter trace is requested or when ``belief_errors`` is set.

    ``belief_errors`` also reports the continuous-time average, over
    ``[0, horizon * dt]``, of |belief mean - AoI| and of |ack-free estimate
    - AoI|, where the ack-free estimate is the time since the agent's last
    admitted send. The average uses ``probes_per_epoch`` midpoint samples
    inside every epoch; probes only read state, they never trigger actions.
    """
    if model is None:
        model = policy.model if isinstance(policy, UpperPolicy) else ObsModel.POMFC
    if variant is None:
        variant = policy.variant if isinstance(policy, UpperPolicy) else Variant.TRUE_STATE
    model, variant = ObsModel(model), Variant(variant)
    horizon = cfg.eval_horizon if horizon is None else horizon
    n = cfg.n_agents
    if isinstance(policy, UpperPolicy):
        if policy.levels != cfg.levels:
            raise ValueError(f"policy has {policy.levels} levels, config has {cfg.levels}")
        if policy.kind == "linear" and policy.obs_dim != obs_dim(model, n, cfg.n_particles):
            raise ValueError(
                f"policy expects {policy.obs_dim}-dim observations, {model.value} gives "
                f"{obs_dim(model, n, cfg.n_particles)} for N={n}"
            )
    if trace_agent is not None and not 0 <= trace_agent < n:
        raise IndexError(f"agent index {trace_agent} out of range for N={n}")
    beliefs = uses_belief(model, variant) or trace_agent is not None or belief_errors
    want_particles = (
        isinstance(policy, UpperPolicy) and policy.kind == "linear" and model is ObsModel.NA_DEC_PARTICLES
    )
    sim = Simulation(cfg, seed, beliefs=beliefs, c1_delay=c1_delay, c2_delay=c2_delay)

    steps = horizon + 1
    avg_aoi = np.empty(steps)
    cum = np.empty(steps)
    load = np.empty(steps)
    rewards = np.empty(steps)
    err = np.zeros(2)
    tr = None
    if trace_agent is not None:
        tr = FilterTrace(trace_agent, *(np.empty(steps) for _ in range(6)))
    snaps = set(snapshot_times)
    total_drops = 0
    for t in range(steps):
        if t > 0:
            sim.run_until(t * cfg.dt)
        snap = sim.snapshot(want_particles)
        avg_aoi[t] = snap.aoi.mean()
        load[t] = snap.load
        if beliefs:
            if tr is not None:
                k = trace_agent
                tr.t[t] = sim.now
                tr.true_aoi[t] = snap.aoi[k]
                tr.mean[t] = snap.belief_mean[k]
                tr.std[t] = snap.belief_std[k]
                tr.acks[t] = sim.acks_received[k]
                tr.ackfree[t] = sim.agents[k].ackfree_estimate(sim.now)
            if t in snaps and tr is not None:
                tr.snapshots[t] = (snap.aoi.copy(), snap.belief_mean.copy())
        actions = _decide(policy, sim, model, variant, snap, t)
        drops = sim.send(actions)
        total_drops += drops
        cum[t] = total_drops / n
        rewards[t] = reward(snap.aoi, drops, cfg.drop_penalty)
        if belief_errors and t < horizon:
            for k in range(probes_per_epoch):
                sim.run_until((t + (k + 0.5) / probes_per_epoch) * cfg.dt)
                x = sim.aoi()
                mu, _, _ = sim.belief_stats()
                ackfree = np.array([a.ackfree_estimate(sim.now) for a in sim.agents])
                err += [np.abs(mu - x).mean(), np.abs(ackfree - x).mean()]

    span = horizon * cfg.dt
    n_probes = horizon * probes_per_epoch if belief_errors else 0
    return EpisodeMetrics(
        avg_aoi=avg_aoi,
        cum_drops=cum,
        load=load,
        rewards=rewards,
        c2_drops=sim.c2.drops,
        final_aoi=sim.aoi(),
        integrated_aoi=sim._integral / (n * span) if span > 0 else 0.0,
        belief_error=err[0] / n_probes if n_probes else None,
        ackfree_error=err[1] / n_probes if n_probes else None,
        trace=tr,
    )
