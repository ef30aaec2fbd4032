"""Cross-entropy policy search over upper-level policy parameters.

Training is centralized: the objective runs full episodes in which the
upper-level policy may read the complete population snapshot. Every
candidate of an iteration is scored on the same episode seeds (common
random numbers), and the incumbent best is re-scored alongside them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .core import RngStreams, SimConfig, Stream
from .experiments import _map
from .policy import ObsModel, UpperPolicy, Variant, obs_dim
from .simulation import run_episode

__all__ = [
    "TrainConfig",
    "TrainLog",
    "TrainingError",
    "episode_return",
    "EpisodeObjective",
    "train_cem",
    "train_policy",
]


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    population: int = 32
    elite_frac: float = 0.2
    iterations: int = 30
    episodes: int = 4
    init_mean: float = 0.0
    init_std: float = 2.0
    min_std: float = 0.0
    # std <- s * elite std + (1 - s) * std; keeps CEM from collapsing early
    std_smoothing: float = 0.7
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.population < 4:
            raise ValueError("population must be at least 4")
        if not 0.0 < self.elite_frac < 1.0:
            raise ValueError("elite fraction must lie in (0, 1)")
        if self.iterations < 1 or self.episodes < 1:
            raise ValueError("iterations and episodes must be positive")
        if not self.init_std > 0:
            raise ValueError("initial std must be positive")
        if not 0.0 < self.std_smoothing <= 1.0:
            raise ValueError("std smoothing must lie in (0, 1]")

    @property
    def n_elite(self) -> int:
        return max(1, int(math.floor(self.elite_frac * self.population)))


@dataclass
class TrainLog:
    best: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    std_norm: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.best)

    def to_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("iteration", "best", "mean", "std_norm"))
            for i, row in enumerate(zip(self.best, self.mean, self.std_norm)):
                w.writerow([i] + ["%.17g" % v for v in row])


def episode_return(policy: UpperPolicy, cfg: SimConfig, model=None, variant=None, seed: int = 0) -> float:
    """Undiscounted return of one training episode (epochs ``0 .. cfg.horizon``)."""
    return run_episode(cfg, policy, model, variant, seed, horizon=cfg.horizon).episode_return


@dataclass(frozen=True)
class EpisodeObjective:
    """Mean training return of the policy obtained by loading ``params``."""

    cfg: SimConfig
    template: UpperPolicy

    def __call__(self, params: np.ndarray, seeds: Sequence[int]) -> float:
        policy = self.template.with_flat(params)
        return float(np.mean([episode_return(policy, self.cfg, seed=s) for s in seeds]))


def _score(params: np.ndarray, objective, seeds) -> float:
    return objective(params, seeds)


def train_cem(
    objective: Callable[[np.ndarray, Sequence[int]], float],
    dim: int,
    tc: TrainConfig,
    callback: Callable[[int, TrainLog], None] | None = None,
) -> tuple[np.ndarray, TrainLog]:
    """Maximize ``objective(params, seeds)`` with a diagonal-Gaussian CEM.

    Returns the best parameters seen and the per-iteration log; ``best`` in
    the log is the best score so far.
    """
    rng = RngStreams(tc.seed).get(Stream.TRAINER)
    mean = np.full(dim, float(tc.init_mean))
    std = np.full(dim, float(tc.init_std))
    best, best_score = None, -math.inf
    log = TrainLog()
    for it in range(tc.iterations):
        seeds = tuple(int(s) for s in rng.integers(0, 2**32, tc.episodes))
        pop = mean + std * rng.standard_normal((tc.population, dim))
        if best is not None:
            pop[0] = best
        scores = np.array(_map(partial(_score, objective=objective, seeds=seeds), list(pop), tc.workers))
        bad = np.flatnonzero(~np.isfinite(scores))
        if bad.size:
            k = int(bad[0])
            raise TrainingError(
                f"iteration {it}: objective returned {scores[k]} for candidate {k} "
                f"(params={pop[k].tolist()}, seeds={list(seeds)})"
            )
        order = np.argsort(-scores, kind="stable")
        elite = pop[order[: tc.n_elite]]
        mean = elite.mean(axis=0)
        beta = tc.std_smoothing
        std = np.maximum(beta * elite.std(axis=0) + (1 - beta) * std, tc.min_std)
        if scores[order[0]] > best_score:
            best_score, best = float(scores[order[0]]), pop[order[0]].copy()
        log.best.append(best_score)
        log.mean.append(float(scores.mean()))
        log.std_norm.append(float(np.linalg.norm(std)))
        if callback is not None:
            callback(it, log)
    return best, log


def train_policy(
    cfg: SimConfig,
    tc: TrainConfig,
    model: ObsModel | str = ObsModel.POMFC,
    variant: Variant | str = Variant.TRUE_STATE,
    kind: str = "static",
    callback: Callable[[int, TrainLog], None] | None = None,
) -> tuple[UpperPolicy, TrainLog]:
    """Train a shared upper-level policy on ``cfg`` (``N``, ``T`` as given)."""
    model, variant = ObsModel(model), Variant(variant)
    q = cfg.levels
    if kind == "static":
        template = UpperPolicy.static(np.zeros(q), model=model, variant=variant)
    elif kind == "linear":
        d = obs_dim(model, cfg.n_agents, cfg.n_particles)
        template = UpperPolicy.linear(np.zeros((q, d)), np.zeros(q), model=model, variant=variant)
    else:
        raise ValueError(f"unknown policy kind {kind!r}")
    params, log = train_cem(EpisodeObjective(cfg, template), template.n_params, tc, callback)
    return template.with_flat(params), log
