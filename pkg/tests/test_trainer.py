import numpy as np
import pytest

from aoimfc import build_config
from aoimfc.trainer import EpisodeObjective, TrainConfig, TrainingError, episode_return, train_cem, train_policy
from aoimfc.policy import UpperPolicy


@pytest.mark.parametrize("pop,frac,elite", [(16, 0.2, 3), (4, 0.01, 1), (32, 0.2, 6)])
def test_elite_count(pop, frac, elite):
    assert TrainConfig(population=pop, elite_frac=frac).n_elite == elite


def test_recovers_quadratic_optimum():
    target = np.linspace(-3, 3, 16)

    def f(theta, seeds):
        return -float(np.sum((theta - target) ** 2))

    best, log = train_cem(f, 16, TrainConfig(population=64, iterations=50, seed=0))
    assert np.max(np.abs(best - target)) < 0.1
    assert len(log) == 50
    assert all(b2 >= b1 for b1, b2 in zip(log.best, log.best[1:]))


def test_reproducible_log():
    f = lambda th, seeds: -float(np.sum(th**2)) + 0.01 * (seeds[0] % 7)  # noqa: E731
    tc = TrainConfig(population=8, iterations=5, seed=3)
    a, la = train_cem(f, 4, tc)
    b, lb = train_cem(f, 4, tc)
    np.testing.assert_array_equal(a, b)
    assert la.best == lb.best and la.mean == lb.mean


def test_non_finite_objective_is_reported():
    with pytest.raises(TrainingError, match="nan"):
        train_cem(lambda th, seeds: float("nan"), 2, TrainConfig(population=4, iterations=2))


@pytest.mark.parametrize("kw", [dict(population=2), dict(elite_frac=1.0), dict(iterations=0), dict(init_std=0)])
def test_invalid_train_config(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


def test_all_hold_return():
    cfg = build_config({"N": 13})
    assert episode_return(UpperPolicy.static(np.full(16, -1e3)), cfg, seed=0) == -1275.0


def test_episode_return_deterministic():
    cfg = build_config({"N": 20})
    pol = UpperPolicy.static(np.zeros(16))
    assert episode_return(pol, cfg, seed=4) == episode_return(pol, cfg, seed=4)


def test_objective_uses_common_seeds():
    cfg = build_config({"N": 10, "T": 10})
    obj = EpisodeObjective(cfg, UpperPolicy.static(np.zeros(16)))
    assert obj(np.ones(16), [1, 2]) == obj(np.ones(16), [1, 2])


def test_short_training_run_improves_on_start(tmp_path):
    cfg = build_config({"N": 20, "T": 20})
    tc = TrainConfig(population=8, iterations=3, episodes=2, seed=0)
    seen = []
    pol, log = train_policy(cfg, tc, callback=lambda it, lg: seen.append(it))
    assert seen == [0, 1, 2] and pol.kind == "static" and pol.levels == 16
    log.to_csv(str(tmp_path / "log.csv"))
    assert (tmp_path / "log.csv").read_text().startswith("iteration,best,mean,std_norm")
    lin, _ = train_policy(cfg, TrainConfig(population=4, iterations=1, episodes=1), kind="linear")
    assert lin.obs_dim == 7
