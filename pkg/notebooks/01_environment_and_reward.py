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
# # The intersection environment and its reward
#
# One ego vehicle follows a leader along a single approach to a signalised
# stop line. The light runs green 0-16 s, amber 16-19 s, red 19-45 s, then repeats.
# During red (and during amber when the ego can still stop comfortably) a
# standing zero-length vehicle sits on the stop line, so stopping for the light
# is just car following.

# %%
import matplotlib.pyplot as plt
import numpy as np

from sigdrl import SimConfig
from sigdrl.env import EpisodeSetup, IntersectionEnv
from sigdrl.leaders import LeaderTrajectory
from sigdrl.rewards import desired_gap, f_acc, f_eff, f_jerk

cfg = SimConfig()
cfg.schedule

# %% [markdown]
# ## Reward components
#
# Headway is scored by a log-normal bump that peaks at the desired gap
# s0 + T*v, acceleration by an asymmetric square root (accelerating hurts more
# than braking by the same amount) and jerk by a fourth root, which makes even
# small changes of acceleration noticeably expensive.

# %%
gaps = np.linspace(0.5, 80, 400)
fig, axes = plt.subplots(1, 3, figsize=(12, 3.2))
for v in (0, 5, 10, 15):
    axes[0].plot(gaps, [f_eff(g, v, cfg) for g in gaps], label=f"v={v} m/s (S*={desired_gap(v, cfg):.1f})")
axes[0].set(xlabel="gap [m]", ylabel="f_eff")
axes[0].legend(fontsize=7)
acc = np.linspace(cfg.a_min, cfg.a_max, 200)
axes[1].plot(acc, [f_acc(a, cfg) for a in acc])
axes[1].set(xlabel="acceleration [m/s^2]", ylabel="f_acc")
jerk = np.linspace(-150, 150, 400)
axes[2].plot(jerk, [f_jerk(j, cfg) for j in jerk])
axes[2].set(xlabel="jerk [m/s^3]", ylabel="f_jerk")
fig.tight_layout()

# %% [markdown]
# ## A hand-written controller through the light
#
# A crude proportional rule (track the desired gap to whatever is ahead) is
# enough to see the virtual vehicle at work: the ego slows for red, waits,
# and leaves at green. The leader here is far ahead so only the light matters.

# %%
def gap_keeper(obs):
    v = obs[0] * cfg.v_limit
    gap = obs[2] * cfg.d_influence
    return float(np.clip(0.4 * (gap - desired_gap(v, cfg)) - 0.8 * max(v - 12.0, 0.0), cfg.a_min, cfg.a_max))


leader = LeaderTrajectory.from_speeds(np.full(2501, 12.0), cfg.dt, p0=400.0)
env = IntersectionEnv(EpisodeSetup(leader, v0=10.0, d_tl0=250.0, t0=20.0, gap0=700.0), cfg)
obs = env.reset()
rows, done = [], False
while not done:
    obs, r, done, out = env.step(gap_keeper(obs))
    rows.append((out.next.t, out.next.v_n, out.next.d_tl, out.applied_accel, r, out.next.light.value))
t, v, d, a, r, light = map(np.array, zip(*rows))

fig, axes = plt.subplots(3, 1, figsize=(8, 6), sharex=True)
axes[0].plot(t, d)
axes[0].axhline(0, color="k", lw=0.5)
axes[0].set_ylabel("distance to line [m]")
axes[1].plot(t, v)
axes[1].set_ylabel("speed [m/s]")
axes[2].plot(t, r)
axes[2].set(ylabel="reward", xlabel="time [s]")
fig.tight_layout()
print("crossed the line at t =", float(t[np.argmax(d <= 0)]), "s; light then:", light[np.argmax(d <= 0)])
