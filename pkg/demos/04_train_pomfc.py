"""
Training a shared policy
========================

A static upper-level policy is a vector of 16 send probabilities, one
per AoI level. The cross-entropy method tunes it on a 100-sensor system
with full state during training. Afterwards the same policy runs on the
particle beliefs and on larger and smaller populations.

The default budget below trains in roughly a minute.
"""

# %%
import numpy as np
from scipy.special import expit

from aoimfc import build_config
from aoimfc.experiments import monte_carlo
from aoimfc.policy import Threshold
from aoimfc.trainer import TrainConfig, train_policy

cfg = build_config({"N": 100})
tc = TrainConfig(population=16, iterations=12, episodes=3, seed=1)
policy, log = train_policy(cfg, tc, callback=lambda it, lg: print(f"iter {it:2d}: best return {lg.best[-1]:.2f}"))
print("send probability per level:", np.round(expit(policy.theta), 2))

# %%
seeds = list(range(10_000, 10_030))
trained = monte_carlo(cfg, policy, seeds=seeds)
belief = monte_carlo(cfg, policy, variant="avg-belief", seeds=seeds)
thr = monte_carlo(cfg, Threshold(2), seeds=seeds)
print(f"trained (true state) {trained.time_avg_aoi:.3f}")
print(f"trained (beliefs)    {belief.time_avg_aoi:.3f}")
print(f"Threshold(2)         {thr.time_avg_aoi:.3f}")

# %%
for n in (10, 100, 500):
    res = monte_carlo(cfg.replace(n_agents=n), policy, seeds=seeds[:10])
    print(f"N={n:4d}: AoI {res.time_avg_aoi:.3f}")
