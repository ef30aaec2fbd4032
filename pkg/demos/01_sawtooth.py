"""
One sensor, one path
====================

A single sensor sends on a single path. We print the receiver-side AoI
sawtooth and see what happens when a message meets a busy path or an
ack is lost on the way back.
"""

# %%
import numpy as np

from aoimfc import build_config
from aoimfc.simulation import Simulation

cfg = build_config({"N": 1, "kappa": 1.0, "T_e": 8})
delays = iter([1.5, 0.3, 0.2, 0.7, 0.4, 2.5, 0.1, 0.3])
sim = Simulation(cfg, seed=0, beliefs=True, c1_delay=lambda: next(delays), c2_delay=lambda: 1.2)

# %%
# Send every epoch and probe the AoI four times per epoch.
for t in range(cfg.eval_horizon + 1):
    if t:
        sim.run_until(float(t))
    dropped = sim.send(np.ones(1, dtype=bool))
    print(f"t={t}: AoI {sim.aoi()[0]:.2f}  {'dropped' if dropped else 'admitted'}  unacked={sim.agents[0].unacked}")
    for k in (0.25, 0.5, 0.75):
        sim.run_until(t + k)
        print(f"   t={t + k:.2f}: AoI {sim.aoi()[0]:.2f}")

# %%
print("fresh updates (arrival, AoI after update):", sim.receiver.updates[0])
print("acks lost on the reverse channel:", sim.c2.drops)
