"""Monte Carlo aggregation, parameter sweeps, filter traces and export."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Iterable, Sequence

import numpy as np

from .core import SimConfig
from .policy import ConstantRate, PolicySpec, Threshold, UpperPolicy, policy_to_dict
from .simulation import EpisodeMetrics, FilterTrace, run_episode

__all__ = [
    "RATE_GRID",
    "THRESHOLD_GRID",
    "AGENT_GRID",
    "SNAPSHOT_TIMES",
    "Estimate",
    "AggregateResult",
    "SweepResult",
    "aggregate",
    "monte_carlo",
    "sweep",
    "filter_trace",
    "export",
    "render",
    "read_csv",
    "write_trace",
    "write_snapshots",
]

RATE_GRID = tuple(round(0.1 * k, 1) for k in range(1, 11))
THRESHOLD_GRID = tuple(range(1, 9))
AGENT_GRID = (10, 100, 200, 500, 1000, 2000)
SNAPSHOT_TIMES = (5, 10, 20, 30, 40, 49)

Z95 = 1.96
SERIES = ("avg_aoi", "cum_drops", "load")
SCALARS = ("time_avg_aoi", "final_cum_drops", "c2_drops", "integrated_aoi", "episode_return")


@dataclass(frozen=True)
class Estimate:
    """Mean with a 95% normal-approximation interval."""

    mean: np.ndarray | float
    half_width: np.ndarray | float

    @property
    def lo(self):
        return self.mean - self.half_width

    @property
    def hi(self):
        return self.mean + self.half_width


def _estimate(samples: np.ndarray) -> Estimate:
    s = samples.shape[0]
    mean = samples.mean(axis=0)
    if s < 2:
        return Estimate(mean, np.zeros_like(mean))
    return Estimate(mean, Z95 * samples.std(axis=0, ddof=1) / math.sqrt(s))


@dataclass
class AggregateResult:
    series: dict[str, Estimate]
    scalars: dict[str, Estimate]
    per_run: dict[str, np.ndarray]
    seeds: tuple[int, ...]
    config: SimConfig | None = None

    @property
    def runs(self) -> int:
        return len(self.seeds)

    @property
    def time_avg_aoi(self) -> float:
        return float(self.scalars["time_avg_aoi"].mean)


@dataclass
class SweepResult:
    kind: str
    rows: list[tuple[float, AggregateResult]] = field(default_factory=list)

    def values(self, scalar: str = "time_avg_aoi") -> dict[float, float]:
        return {g: float(r.scalars[scalar].mean) for g, r in self.rows}

    def argmin(self, scalar: str = "time_avg_aoi") -> float:
        vals = self.values(scalar)
        return min(vals, key=vals.get)


def aggregate(runs: Sequence[EpisodeMetrics], seeds: Sequence[int], config: SimConfig | None = None) -> AggregateResult:
    per_run = {name: np.array([getattr(m, name) for m in runs], dtype=float) for name in SERIES}
    per_run["time_avg_aoi"] = np.array([m.time_avg_aoi for m in runs])
    per_run["final_cum_drops"] = np.array([m.cum_drops[-1] for m in runs])
    per_run["c2_drops"] = np.array([m.c2_drops for m in runs], dtype=float)
    per_run["integrated_aoi"] = np.array([m.integrated_aoi for m in runs])
    per_run["episode_return"] = np.array([m.episode_return for m in runs])
    return AggregateResult(
        series={k: _estimate(per_run[k]) for k in SERIES},
        scalars={k: _estimate(per_run[k]) for k in SCALARS},
        per_run=per_run,
        seeds=tuple(seeds),
        config=config,
    )


def _episode(seed: int, cfg: SimConfig, policy: PolicySpec, model, variant) -> EpisodeMetrics:
    return run_episode(cfg, policy, model, variant, seed)


def _map(fn, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    # map() yields in submission order, so the reduction order is fixed
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def monte_carlo(
    cfg: SimConfig,
    policy: PolicySpec,
    model=None,
    variant=None,
    base_seed: int | None = None,
    runs: int | None = None,
    *,
    seeds: Sequence[int] | None = None,
    workers: int = 1,
) -> AggregateResult:
    """Run seeds ``base_seed .. base_seed + runs - 1`` and aggregate them.

    ``runs`` defaults to ``cfg.n_runs`` and ``base_seed`` to ``cfg.seed``.
    An explicit ``seeds`` list must not repeat a seed.
    """
    if seeds is None:
        base = cfg.seed if base_seed is None else base_seed
        s = cfg.n_runs if runs is None else runs
        if s < 1:
            raise ValueError("need at least one Monte Carlo run")
        seeds = [base + k for k in range(s)]
    seeds = [int(x) for x in seeds]
    if not seeds:
        raise ValueError("need at least one Monte Carlo run")
    if len(set(seeds)) != len(seeds):
        raise ValueError("Monte Carlo seeds must be distinct")
    results = _map(partial(_episode, cfg=cfg, policy=policy, model=model, variant=variant), seeds, workers)
    return aggregate(results, seeds, cfg)


def sweep(
    kind: str,
    grid: Iterable[float] | None,
    cfg: SimConfig,
    runs: int | None = None,
    *,
    policy: PolicySpec | None = None,
    model=None,
    variant=None,
    base_seed: int | None = None,
    workers: int = 1,
) -> SweepResult:
    """One Monte Carlo aggregate per grid point.

    ``kind`` is ``"rate"`` (ConstantRate), ``"threshold"`` (Threshold) or
    ``"agents"`` (``policy`` evaluated with ``N`` from the grid and
    ``C = floor(kappa N)``). Every grid point reuses the same seed set.
    """
    defaults = {"rate": RATE_GRID, "threshold": THRESHOLD_GRID, "agents": AGENT_GRID}
    if kind not in defaults:
        raise ValueError(f"unknown sweep kind {kind!r}")
    grid = list(defaults[kind] if grid is None else grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    out = SweepResult(kind)
    for g in grid:
        if kind == "rate":
            point_cfg, pol = cfg, ConstantRate(float(g))
        elif kind == "threshold":
            point_cfg, pol = cfg, Threshold(float(g))
        else:
            if policy is None:
                raise ValueError("agent sweep needs a policy")
            if int(g) != g or g < 1:
                raise ValueError(f"invalid agent count {g!r}")
            point_cfg, pol = cfg.replace(n_agents=int(g)), policy
        res = monte_carlo(point_cfg, pol, model, variant, base_seed, runs, workers=workers)
        out.rows.append((float(g), res))
    return out


def filter_trace(
    cfg: SimConfig,
    policy: PolicySpec,
    agent: int,
    seed: int | None = None,
    *,
    model=None,
    variant=None,
    snapshot_times: Sequence[int] = SNAPSHOT_TIMES,
) -> FilterTrace:
    """Belief of one agent over an evaluation episode plus population snapshots."""
    m = run_episode(cfg, policy, model, variant, seed, trace_agent=agent, snapshot_times=snapshot_times)
    return m.trace


# -- export --------------------------------------------------------------------

CSV_COLUMNS = ("grid", "epoch", "metric", "mean", "ci_lo", "ci_hi")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def _rows(result: AggregateResult, grid: float | None) -> Iterable[tuple]:
    for name, est in result.series.items():
        for t, (m, lo, hi) in enumerate(zip(est.mean, est.lo, est.hi)):
            yield (grid, t, name, m, lo, hi)
    for name, est in result.scalars.items():
        yield (grid, None, name, est.mean, est.lo, est.hi)


def _metadata(result: AggregateResult | SweepResult | None, cfg: SimConfig | None,
              policy: PolicySpec | None) -> dict[str, Any]:
    meta: dict[str, Any] = {"format": "aoimfc-result", "version": 1}
    if isinstance(result, SweepResult):
        meta["sweep"] = result.kind
        first = result.rows[0][1] if result.rows else None
    else:
        first = result
    if first is not None:
        cfg = cfg or first.config
        meta["seed"] = first.seeds[0]
        meta["runs"] = first.runs
    if cfg is not None:
        meta["config_hash"] = cfg.digest()
    if policy is not None:
        meta["policy"] = policy_to_dict(policy)["kind"]
    return meta


def export(
    result: AggregateResult | SweepResult | None,
    path: str,
    fmt: str = "csv",
    *,
    cfg: SimConfig | None = None,
    policy: PolicySpec | None = None,
) -> None:
    """Write :func:`render` output to ``path``."""
    _write(path, render(result, fmt, cfg=cfg, policy=policy))


def render(
    result: AggregateResult | SweepResult | None,
    fmt: str = "csv",
    *,
    cfg: SimConfig | None = None,
    policy: PolicySpec | None = None,
) -> str:
    """Serialize a result as CSV or as a JSON document.

    CSV: one ``# key=value ...`` metadata line, the header
    ``grid,epoch,metric,mean,ci_lo,ci_hi`` and one row per (grid point,
    epoch, metric); per-epoch series carry an epoch, episode scalars leave it
    empty, and ``grid`` is empty outside sweeps. Numbers use 17 significant
    digits so re-reading is exact.
    """
    meta = _metadata(result, cfg, policy)
    if isinstance(result, SweepResult):
        parts = [(g, r) for g, r in result.rows]
    elif result is None:
        parts = []
    else:
        parts = [(None, result)]
    if fmt == "csv":
        buf = io.StringIO()
        buf.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for g, r in parts:
            for row in _rows(r, g):
                w.writerow([_fmt(row[0]), _fmt(row[1]), row[2], *map(_fmt, row[3:])])
        text = buf.getvalue()
    elif fmt in ("doc", "json"):
        doc = dict(meta)
        doc["results"] = [
            {
                "grid": g,
                "series": {k: {"mean": e.mean.tolist(), "ci_lo": e.lo.tolist(), "ci_hi": e.hi.tolist()}
                           for k, e in r.series.items()},
                "scalars": {k: {"mean": float(e.mean), "ci_lo": float(e.lo), "ci_hi": float(e.hi)}
                            for k, e in r.scalars.items()},
                "seeds": list(r.seeds),
            }
            for g, r in parts
        ]
        text = json.dumps(doc, indent=1) + "\n"
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return text


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def read_csv(path: str) -> tuple[dict[str, str], list[dict[str, Any]]]:
    """Parse a CSV written by :func:`export` back into (metadata, rows)."""
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        meta = dict(item.split("=", 1) for item in first[1:].split()) if first.startswith("#") else {}
        rows = []
        for rec in csv.DictReader(fh):
            rows.append({
                "grid": float(rec["grid"]) if rec["grid"] else None,
                "epoch": int(rec["epoch"]) if rec["epoch"] else None,
                "metric": rec["metric"],
                "mean": float(rec["mean"]),
                "ci_lo": float(rec["ci_lo"]),
                "ci_hi": float(rec["ci_hi"]),
            })
    return meta, rows


def write_trace(trace: FilterTrace, path: str) -> None:
    """Per-epoch filter trace of one agent as CSV."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "true_aoi", "belief_mean", "belief_std", "acks", "ackfree"))
    for row in zip(trace.t, trace.true_aoi, trace.mean, trace.std, trace.acks, trace.ackfree):
        w.writerow([_fmt(row[0]), _fmt(row[1]), _fmt(row[2]), _fmt(row[3]), int(row[4]), _fmt(row[5])])
    _write(path, buf.getvalue())


def write_snapshots(trace: FilterTrace, path: str) -> None:
    """Population true AoI and belief means at the snapshot epochs, long format."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("epoch", "agent", "true_aoi", "belief_mean"))
    for epoch in sorted(trace.snapshots):
        x, mu = trace.snapshots[epoch]
        for n, (a, b) in enumerate(zip(x, mu)):
            w.writerow([epoch, n, _fmt(a), _fmt(b)])
    _write(path, buf.getvalue())


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))
