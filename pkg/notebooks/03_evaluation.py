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
# # Evaluating a checkpoint
#
# Three suites: replaying test pairs against their recorded followers (ECDFs of
# time-to-collision, headway and jerk), the scripted hard-braking leader, and
# the 128-scenario signal grid. The pairs here come from the synthetic
# stand-in corpus (OU leaders with a noisy IDM follower), so the "human"
# curves are a model, not people.
#
# Run 02_training.py first, or point CHECKPOINT at any checkpoint.zip.

# %%
import csv
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from sigdrl import SimConfig
from sigdrl.data import split, synthetic_pairs
from sigdrl.evaluation import run_benchmark_suite
from sigdrl.training import load_policy

cfg = SimConfig()
CHECKPOINT = "ddpg_desk.zip"
policy = load_policy(CHECKPOINT)

pairs = synthetic_pairs(40, cfg, seed=3, duration=60.0)
_, test = split(pairs, 0.6, seed=3)
bundle = run_benchmark_suite(policy, test, cfg, seed=0, out_dir=Path("eval_" + policy.algo), plots=True)
for row in bundle.summary:
    print(dict(zip(["suite", "population", "episodes", "failures", "collisions", "red_violations", "min_gap"], row)))

# %%
fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
for ax, metric in zip(axes, ("ttc", "gap", "jerk")):
    for pop, rep in bundle.reports.items():
        e = getattr(rep, metric)
        if e is not None:
            ax.step(e.x, e.f, where="post", label=pop)
    ax.set(xlabel=metric, ylabel="ECDF")
axes[0].legend()
fig.tight_layout()

# %% [markdown]
# ## Hard-braking leader
#
# The leader slows, stops twice (once at 6 m/s^2, harder than the ego can
# brake) and pulls away again; the mask keeps the gap above the standstill
# distance.

# %%
tr = bundle.critical
fig, axes = plt.subplots(2, 1, figsize=(8, 5), sharex=True)
axes[0].plot(tr.t, tr.v_lead, label="leader")
axes[0].plot(tr.t, tr.v, label="ego")
axes[0].set_ylabel("speed [m/s]")
axes[0].legend()
axes[1].plot(tr.t, tr.gap)
axes[1].set(ylabel="gap [m]", xlabel="time [s]", ylim=(0, 60))
fig.tight_layout()
print("min gap", float(np.min(tr.gap)), "m; actions in", (float(tr.action.min()), float(tr.action.max())))

# %% [markdown]
# ## Signal grid

# %%
with open(bundle.out_dir / "grid_compliance.csv") as fh:
    grid = list(csv.DictReader(fh))
print(len(grid), "scenarios;", sum(r["compliant"] == "0" for r in grid), "red violations;",
      sum(r["crossed_line"] == "1" for r in grid), "reached the line")
