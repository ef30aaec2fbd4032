"""Send policies and the observations they are conditioned on.

Two layers act at every epoch. An upper-level policy maps a population
observation to a :class:`DecisionRule` (one send probability per AoI level),
and every agent then samples its own action from that rule using its
quantized AoI. Fixed baselines bypass the upper layer.

Observation layouts (population std, divisor ``N``):

=================  ============================================================
POMFC / true       ``(mean x, mean M1, mean M2, std x, std M1, std M2, load)``
POMFC / belief     ``(mean mu, mean u, mean u, std mu, std u, std u, mean load~)``
NA / true          ``(x_1, ..., x_N)``
NA / belief        ``(mu_1, ..., mu_N)``
NA-Dec / true      ``(x_n, M1_n + M2_n, load)`` for n = 1..N, flattened
NA-Dec / belief    ``(mu_n, u_n, load~_n)`` for n = 1..N, flattened
NA-Dec-Particles   ``(x_n1, ..., x_nP, u_n, load~_n)`` for n = 1..N, flattened
=================  ============================================================

``mu`` is an agent's particle mean, ``u`` its own unacknowledged count and
``load~`` the channel load it saw at its last send attempt.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
from scipy.special import expit

__all__ = [
    "ObsModel",
    "Variant",
    "uses_belief",
    "obs_dim",
    "Snapshot",
    "ObservationVector",
    "build_observation",
    "DecisionRule",
    "act",
    "act_all",
    "UpperPolicy",
    "evaluate_upper",
    "ConstantRate",
    "AlwaysSend",
    "Threshold",
    "ScriptedPolicy",
    "fixed_act",
    "reward",
    "PolicyFormatError",
    "policy_to_dict",
    "policy_from_dict",
    "save_policy",
    "load_policy",
]


class ObsModel(str, enum.Enum):
    POMFC = "pomfc"
    NA = "na"
    NA_DEC = "na-dec"
    NA_DEC_PARTICLES = "na-dec-particles"


class Variant(str, enum.Enum):
    TRUE_STATE = "true-state"
    AVG_BELIEF = "avg-belief"


def uses_belief(model: ObsModel, variant: Variant) -> bool:
    """Whether agents act on particle beliefs rather than the true AoI."""
    return Variant(variant) is Variant.AVG_BELIEF or ObsModel(model) is ObsModel.NA_DEC_PARTICLES


def obs_dim(model: ObsModel, n_agents: int, n_particles: int = 1) -> int:
    model = ObsModel(model)
    if model is ObsModel.POMFC:
        return 7
    if model is ObsModel.NA:
        return n_agents
    if model is ObsModel.NA_DEC:
        return 3 * n_agents
    return n_agents * (n_particles + 2)


@dataclass
class Snapshot:
    """Population state at one decision epoch.

    Belief fields are None in runs without particle filters.
    """

    aoi: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    unacked: np.ndarray
    load: float
    observed_load: np.ndarray
    belief_mean: np.ndarray | None = None
    belief_std: np.ndarray | None = None
    particles: np.ndarray | None = None

    @property
    def n_agents(self) -> int:
        return len(self.aoi)


@dataclass(frozen=True)
class ObservationVector:
    model: ObsModel
    variant: Variant
    payload: np.ndarray


def _check_len(name: str, arr: np.ndarray | None, n: int) -> np.ndarray:
    if arr is None:
        raise ValueError(f"snapshot has no {name}")
    arr = np.asarray(arr, dtype=float)
    if arr.shape[0] != n:
        raise ValueError(f"snapshot field {name} has {arr.shape[0]} rows, expected {n}")
    return arr


def build_observation(model: ObsModel, variant: Variant, snap: Snapshot) -> ObservationVector:
    model, variant = ObsModel(model), Variant(variant)
    n = snap.n_agents
    x = _check_len("aoi", snap.aoi, n)
    if model is ObsModel.NA_DEC_PARTICLES:
        parts = _check_len("particles", snap.particles, n)
        u = _check_len("unacked", snap.unacked, n)
        seen = _check_len("observed_load", snap.observed_load, n)
        payload = np.column_stack([parts, u, seen]).ravel()
        return ObservationVector(model, variant, payload)

    belief = variant is Variant.AVG_BELIEF
    if belief:
        x = _check_len("belief_mean", snap.belief_mean, n)
        u = _check_len("unacked", snap.unacked, n)
        seen = _check_len("observed_load", snap.observed_load, n)
    else:
        m1 = _check_len("m1", snap.m1, n)
        m2 = _check_len("m2", snap.m2, n)

    if model is ObsModel.POMFC:
        if belief:
            payload = [x.mean(), u.mean(), u.mean(), x.std(), u.std(), u.std(), seen.mean()]
        else:
            payload = [x.mean(), m1.mean(), m2.mean(), x.std(), m1.std(), m2.std(), snap.load]
        return ObservationVector(model, variant, np.array(payload, dtype=float))
    if model is ObsModel.NA:
        return ObservationVector(model, variant, x.copy())
    if belief:
        cols = [x, u, seen]
    else:
        cols = [x, m1 + m2, np.full(n, snap.load)]
    return ObservationVector(model, variant, np.column_stack(cols).ravel())


@dataclass(frozen=True)
class DecisionRule:
    """Per-level send probabilities."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or not np.all((p >= 0.0) & (p <= 1.0)):
            raise ValueError("decision rule entries must lie in [0, 1]")
        object.__setattr__(self, "probs", p)

    @property
    def levels(self) -> int:
        return len(self.probs)


def act(rule: DecisionRule, level: int, stream: np.random.Generator) -> int:
    return int(stream.random() < rule.probs[level])


def act_all(rule: DecisionRule, levels: np.ndarray, stream: np.random.Generator) -> np.ndarray:
    """One Bernoulli draw per agent, in agent order."""
    return stream.random(len(levels)) < rule.probs[levels]


@dataclass(frozen=True)
class UpperPolicy:
    """Shared upper-level policy.

    ``static``: ``h = sigmoid(theta)`` regardless of the observation.
    ``linear``: ``h = sigmoid(W o + b)`` with ``W`` of shape (levels, obs_dim).
    """

    kind: str
    levels: int
    theta: np.ndarray | None = None
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    model: ObsModel = ObsModel.POMFC
    variant: Variant = Variant.TRUE_STATE

    def __post_init__(self) -> None:
        if self.kind == "static":
            th = np.asarray(self.theta, dtype=float)
            if th.shape != (self.levels,):
                raise ValueError(f"static policy needs {self.levels} parameters, got {th.shape}")
            object.__setattr__(self, "theta", th)
        elif self.kind == "linear":
            w = np.asarray(self.weights, dtype=float)
            b = np.asarray(self.bias, dtype=float)
            if w.ndim != 2 or w.shape[0] != self.levels or b.shape != (self.levels,):
                raise ValueError("linear policy needs W (levels, obs_dim) and b (levels,)")
            object.__setattr__(self, "weights", w)
            object.__setattr__(self, "bias", b)
        else:
            raise ValueError(f"unknown upper policy kind {self.kind!r}")
        object.__setattr__(self, "model", ObsModel(self.model))
        object.__setattr__(self, "variant", Variant(self.variant))

    @classmethod
    def static(cls, theta, **kw) -> "UpperPolicy":
        theta = np.asarray(theta, dtype=float)
        return cls("static", len(theta), theta=theta, **kw)

    @classmethod
    def linear(cls, weights, bias, **kw) -> "UpperPolicy":
        weights = np.asarray(weights, dtype=float)
        return cls("linear", weights.shape[0], weights=weights, bias=bias, **kw)

    @property
    def obs_dim(self) -> int | None:
        return None if self.kind == "static" else self.weights.shape[1]

    @property
    def n_params(self) -> int:
        return self.levels if self.kind == "static" else self.weights.size + self.levels

    def flat(self) -> np.ndarray:
        if self.kind == "static":
            return self.theta.copy()
        return np.concatenate([self.weights.ravel(), self.bias])

    def with_flat(self, params: np.ndarray) -> "UpperPolicy":
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        if self.kind == "static":
            return UpperPolicy.static(params, model=self.model, variant=self.variant)
        w = params[: self.weights.size].reshape(self.weights.shape)
        return UpperPolicy.linear(w, params[self.weights.size :], model=self.model, variant=self.variant)


def evaluate_upper(policy: UpperPolicy, obs: ObservationVector | None) -> DecisionRule:
    if policy.kind == "static":
        return DecisionRule(expit(policy.theta))
    if obs is None:
        raise ValueError("linear policy needs an observation")
    o = np.asarray(obs.payload, dtype=float)
    if o.shape != (policy.obs_dim,):
        raise ValueError(f"observation has dimension {o.size}, policy expects {policy.obs_dim}")
    return DecisionRule(expit(policy.weights @ o + policy.bias))


@dataclass(frozen=True)
class ConstantRate:
    """Each epoch ``round(rate * N)`` agents, drawn without replacement, send."""

    rate: float

    def __post_init__(self) -> None:
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"rate must lie in (0, 1], got {self.rate}")

    def n_senders(self, n_agents: int) -> int:
        # round half up, so rate 0.5 on odd N is unambiguous
        return int(math.floor(self.rate * n_agents + 0.5))


@dataclass(frozen=True)
class AlwaysSend:
    pass


@dataclass(frozen=True)
class Threshold:
    """Send whenever the true AoI exceeds ``alpha``."""

    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"threshold must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class ScriptedPolicy:
    """Replays a fixed 0/1 action table of shape (epochs, N); for tests."""

    actions: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=bool))

    def at(self, epoch: int, n_agents: int) -> np.ndarray:
        table = np.asarray(self.actions, dtype=bool)
        if epoch >= len(table):
            return np.zeros(n_agents, dtype=bool)
        row = table[epoch]
        if row.shape != (n_agents,):
            raise ValueError("scripted action row does not match the number of agents")
        return row.copy()


FixedPolicy = Union[ConstantRate, AlwaysSend, Threshold, ScriptedPolicy]
PolicySpec = Union[FixedPolicy, UpperPolicy]


def fixed_act(policy: FixedPolicy, aoi: np.ndarray, stream: np.random.Generator, epoch: int = 0) -> np.ndarray:
    """Actions of a fixed baseline for all agents; ``aoi`` is the true AoI."""
    n = len(aoi)
    if isinstance(policy, AlwaysSend):
        return np.ones(n, dtype=bool)
    if isinstance(policy, ConstantRate):
        a = np.zeros(n, dtype=bool)
        a[stream.choice(n, policy.n_senders(n), replace=False)] = True
        return a
    if isinstance(policy, Threshold):
        return np.asarray(aoi) > policy.alpha
    if isinstance(policy, ScriptedPolicy):
        return policy.at(epoch, n)
    raise TypeError(f"not a fixed policy: {policy!r}")


def reward(aoi: np.ndarray, drops: int, drop_penalty: float = 1.0) -> float:
    """Negative mean AoI minus the per-agent drop penalty of this epoch."""
    n = len(aoi)
    return -float(np.mean(aoi)) - drop_penalty * drops / n


class PolicyFormatError(ValueError):
    pass


POLICY_FORMAT = "aoimfc-policy"
POLICY_VERSION = 1


def policy_to_dict(policy: PolicySpec) -> dict[str, Any]:
    doc: dict[str, Any] = {"format": POLICY_FORMAT, "version": POLICY_VERSION}
    if isinstance(policy, UpperPolicy):
        doc.update(kind=policy.kind, levels=policy.levels, model=policy.model.value,
                   variant=policy.variant.value)
        if policy.kind == "static":
            doc["theta"] = policy.theta.tolist()
        else:
            doc["obs_dim"] = policy.obs_dim
            doc["weights"] = policy.weights.ravel().tolist()
            doc["bias"] = policy.bias.tolist()
    elif isinstance(policy, ConstantRate):
        doc.update(kind="constant-rate", rate=policy.rate)
    elif isinstance(policy, AlwaysSend):
        doc.update(kind="always-send")
    elif isinstance(policy, Threshold):
        doc.update(kind="threshold", alpha=policy.alpha)
    else:
        raise PolicyFormatError(f"cannot serialize {type(policy).__name__}")
    return doc


def policy_from_dict(doc: dict[str, Any]) -> PolicySpec:
    if doc.get("format") != POLICY_FORMAT:
        raise PolicyFormatError("not a policy document")
    if doc.get("version") != POLICY_VERSION:
        raise PolicyFormatError(f"unsupported policy version {doc.get('version')!r}")
    kind = doc.get("kind")
    try:
        if kind == "static":
            return UpperPolicy("static", int(doc["levels"]), theta=doc["theta"],
                               model=doc.get("model", "pomfc"), variant=doc.get("variant", "true-state"))
        if kind == "linear":
            q, d = int(doc["levels"]), int(doc["obs_dim"])
            w = np.asarray(doc["weights"], dtype=float).reshape(q, d)
            return UpperPolicy("linear", q, weights=w, bias=doc["bias"],
                               model=doc.get("model", "pomfc"), variant=doc.get("variant", "true-state"))
        if kind == "constant-rate":
            return ConstantRate(float(doc["rate"]))
        if kind == "always-send":
            return AlwaysSend()
        if kind == "threshold":
            return Threshold(float(doc["alpha"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise PolicyFormatError(f"malformed {kind} policy: {exc}") from exc
    raise PolicyFormatError(f"unknown policy kind {kind!r}")


def save_policy(policy: PolicySpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy_to_dict(policy), fh, indent=2)
        fh.write("\n")


def load_policy(path: str) -> PolicySpec:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PolicyFormatError(f"{path}: {exc.msg}") from exc
    return policy_from_dict(doc)
