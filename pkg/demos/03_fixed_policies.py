"""
Fixed send policies
===================

Sweep the constant send rate and the AoI threshold on a 200-sensor
system with 100 paths, ten seeds per grid point.
"""

# %%
from aoimfc import build_config
from aoimfc.experiments import monte_carlo, sweep
from aoimfc.policy import AlwaysSend

cfg = build_config({"N": 200})
runs = 10

# %%
rates = sweep("rate", None, cfg, runs, base_seed=0)
for omega, res in rates.rows:
    est = res.scalars["time_avg_aoi"]
    print(f"rate {omega:.1f}: AoI {est.mean:.3f} ± {est.half_width:.3f}   "
          f"drops/agent {res.scalars['final_cum_drops'].mean:.2f}")

# %%
# Above a rate of 0.5 more senders than paths try every epoch, so the
# admitted set is a uniform draw of the free paths no matter how many try.
always = monte_carlo(cfg, AlwaysSend(), base_seed=0, runs=runs)
print("AlwaysSend:", round(always.time_avg_aoi, 3))

# %%
thresholds = sweep("threshold", None, cfg, runs, base_seed=0)
for alpha, res in thresholds.rows:
    print(f"alpha {alpha:.0f}: AoI {res.time_avg_aoi:.3f}   drops/agent {res.scalars['final_cum_drops'].mean:.2f}")
print("best threshold:", thresholds.argmin(), " best rate:", rates.argmin())
