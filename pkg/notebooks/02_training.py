# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Desk-scale training
#
# Both agents train on a pool of simulated (OU) leaders. Episodes are kept
# short so that a run finishes in minutes on one core; episode ends are time
# limits, not terminal states, so the critics still bootstrap across them.
# A share of episodes start just before an amber or red onset close to the
# line, which is where the signal logic actually bites.

# %%
import time

import matplotlib.pyplot as plt
import numpy as np

from sigdrl import SimConfig
from sigdrl.scenarios import ou_pool, pool_factory
from sigdrl.training import make_agent, rolling_normalised, save_agent, train

cfg = SimConfig()
EPISODES = 300

# %%
runs = {}
for algo, seconds in (("ddpg", 4.0), ("sac", 1.6)):
    pool = ou_pool(cfg, 200, seconds, seed=1000)
    agent = make_agent(algo, cfg, seed=0)
    t0 = time.perf_counter()
    log = train(agent, pool_factory(pool, cfg, p_free=0.4, p_signal=0.3), EPISODES, seed=0)
    runs[algo] = (agent, log)
    r = log.rewards
    print(f"{algo}: first 50 {r[:50].mean():.1f}, last 50 {r[-50:].mean():.1f}, {time.perf_counter() - t0:.0f} s")

# %%
fig, axes = plt.subplots(1, 2, figsize=(11, 3.5))
for algo, (_, log) in runs.items():
    axes[0].plot(log.rewards, lw=0.6, label=algo)
    axes[1].plot(rolling_normalised(log.rewards), label=algo)
axes[0].set(xlabel="episode", ylabel="episode reward")
axes[1].set(xlabel="episode", ylabel="rolling mean, min-max scaled")
axes[0].legend()
fig.tight_layout()

# %%
for algo, (agent, _) in runs.items():
    save_agent(agent, f"{algo}_desk.zip")
