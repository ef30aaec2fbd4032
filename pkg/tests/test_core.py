import json

import numpy as np
import pytest
from scipy import stats

from aoimfc.core import (
    ConfigError,
    Event,
    EventKind,
    EventQueue,
    RngStreams,
    SimConfig,
    Stream,
    build_config,
    load_config,
    sample_exp,
)


def test_defaults():
    cfg = build_config()
    assert (cfg.n_agents, cfg.n_paths, cfg.lambda1, cfg.lambda2) == (100, 50, 1.5, 1.5)
    assert (cfg.horizon, cfg.eval_horizon, cfg.n_particles, cfg.n_runs, cfg.levels) == (50, 50, 100, 100, 16)


def test_symbol_aliases():
    cfg = build_config({"N": 100, "κ": 0.5, "λ1": 1.5, "λ2": 1.5, "Δt": 1, "T": 50,
                        "T_e": 50, "P": 100, "S": 100, "q": 16, "D": 1})
    assert cfg == SimConfig()


@pytest.mark.parametrize("n,kappa,paths", [(100, 0.5, 50), (10, 0.5, 5), (7, 0.5, 3), (100, 0.57, 57), (1, 1.0, 1)])
def test_paths_floor(n, kappa, paths):
    assert build_config({"N": n, "kappa": kappa}).n_paths == paths


def test_zero_agents_rejected():
    with pytest.raises(ConfigError, match="N must be ≥ 1"):
        build_config({"N": 0})


@pytest.mark.parametrize("raw", [{"C": 10}, {"bogus": 1}, {"kappa": 0}, {"kappa": 1.5}, {"lambda1": 0},
                                 {"N": 2.5}, {"q": 1}, {"N": 1, "kappa": 0.5}, {"N": 3, "n_agents": 3}])
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        build_config(raw)


def test_load_config_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"N": 10, "seed": 3}))
    cfg = load_config(str(p), seed=9)
    assert cfg.n_agents == 10 and cfg.seed == 9
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(p))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.json"))


def test_digest_ignores_seed():
    a, b = build_config({"seed": 1}), build_config({"seed": 2})
    assert a.digest() == b.digest() != build_config({"N": 10}).digest()


def test_event_queue_order_and_ties():
    q = EventQueue()
    q.schedule(Event(2.0, EventKind.FORWARD_DELIVERY, "late"))
    q.schedule(Event(1.0, EventKind.REVERSE_DELIVERY, "a"))
    q.schedule(Event(1.0, EventKind.FORWARD_DELIVERY, "b"))
    assert [q.next().payload for _ in range(3)] == ["a", "b", "late"]
    assert len(q) == 0


def test_event_queue_pops_earliest_first():
    q = EventQueue()
    q.schedule(Event(1.2, EventKind.FORWARD_DELIVERY))
    q.schedule(Event(0.7, EventKind.FORWARD_DELIVERY))
    assert [q.next().time for _ in range(2)] == [0.7, 1.2]
    with pytest.raises(ValueError):
        q.schedule(Event(-1.0, EventKind.FORWARD_DELIVERY))


def test_event_queue_rejects_past():
    q = EventQueue()
    q.schedule(Event(1.0, EventKind.EPOCH_BOUNDARY))
    q.next()
    with pytest.raises(ValueError):
        q.schedule(Event(0.5, EventKind.FORWARD_DELIVERY))


def test_config_path_examples():
    assert build_config({"N": 100, "κ": 0.5}).n_paths == 50
    assert build_config({"N": 2000, "κ": 0.5}).n_paths == 1000


def test_streams_are_independent_and_reproducible():
    a = RngStreams(5).get(Stream.C1_DELAY).random(4)
    b = RngStreams(5).get(Stream.C1_DELAY).random(4)
    c = RngStreams(5).get(Stream.C2_DELAY).random(4)
    d = RngStreams(5).get(Stream.FILTER, 1).random(4)
    e = RngStreams(5).get(Stream.FILTER, 2).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(d, e)


@pytest.mark.parametrize("rate", [0.5, 1.5, 4.0])
def test_exponential_moments(rate):
    x = sample_exp(RngStreams(11).get(Stream.C1_DELAY), rate, 1_000_000)
    assert abs(x.mean() - 1 / rate) < 0.01 / rate
    assert abs(x.var() - 1 / rate**2) < 0.03 / rate**2
    assert (x > 0).all()


def test_exponential_ks():
    x = sample_exp(RngStreams(3).get(Stream.C2_DELAY), 1.5, 100_000)
    assert stats.kstest(x, "expon", args=(0, 1 / 1.5)).pvalue > 0.01


def test_sample_exp_rejects_bad_rate():
    with pytest.raises(ValueError):
        sample_exp(np.random.default_rng(0), 0.0)
