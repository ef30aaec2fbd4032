"""
Tracking the AoI without seeing it
==================================

Each sensor only learns about the receiver through delayed acks. Its
particle filter carries 100 simulated AoI trajectories that are pinned to
the acked value whenever a newer ack arrives. This script compares the
belief mean with the true AoI for one agent and for the whole population.
"""

# %%
import numpy as np

from aoimfc import build_config
from aoimfc.experiments import filter_trace, monte_carlo
from aoimfc.policy import ConstantRate
from aoimfc.simulation import run_episode

cfg = build_config({"N": 100, "P": 100})
tr = filter_trace(cfg, ConstantRate(0.5), agent=0, seed=3)

# %%
print(" t  true   mean    std   acks  ack-free")
for row in zip(tr.t, tr.true_aoi, tr.mean, tr.std, tr.acks, tr.ackfree):
    print("{:2.0f}  {:5.2f}  {:5.2f}  {:5.2f}  {:4.0f}  {:7.2f}".format(*row))

# %%
# Population snapshots: belief means against the true AoI.
for t, (x, mu) in sorted(tr.snapshots.items()):
    print(f"t={t:2d}: mean true {x.mean():.3f}  mean belief {mu.mean():.3f}  "
          f"mean |error| {np.abs(x - mu).mean():.3f}")

# %%
# Continuous-time tracking error of the filter and of the naive estimate
# "time since my last admitted send".
m = run_episode(cfg, ConstantRate(0.5), seed=3, belief_errors=True)
print(f"filter {m.belief_error:.3f} vs ack-free {m.ackfree_error:.3f}")
