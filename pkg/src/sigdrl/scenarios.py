"""Turn leader trajectories and scenario descriptors into episode setups."""

from __future__ import annotations

import math

import numpy as np

from .config import SimConfig
from .data import CfPair, resample
from .env import EpisodeSetup
from .leaders import (
    LeaderTrajectory,
    OuParams,
    ScenarioDescriptor,
    critical_brake_profile,
    gen_ou_trajectory,
)
from .sim import d_safe, ssd

GRID_DURATION = 100.0
GRID_LEADER_BEYOND = 10.0
CRITICAL_V0 = 11.0
CRITICAL_GAP0 = 20.0
# far enough upstream that the stop line never comes within influence range
CRITICAL_D_TL = 1e4
FREE_SPEED_FACTOR = 2.0


def _on_grid(t: float, dt: float) -> float:
    return round(round(t / dt) * dt, 9)


def ou_pool(cfg: SimConfig, n: int, duration: float, seed: int = 0) -> list[LeaderTrajectory]:
    """``n`` OU leaders with uniform start speeds and independent noise seeds."""
    rng = np.random.default_rng(seed)
    pool = []
    for _ in range(n):
        p = OuParams.from_config(cfg, seed=int(rng.integers(2**31)))
        pool.append(gen_ou_trajectory(duration, p, float(rng.uniform(0.0, cfg.v_limit))))
    return pool


def sample_setup(
    leader: LeaderTrajectory, cfg: SimConfig, rng: np.random.Generator, p_free: float = 0.0, p_signal: float = 0.0
) -> EpisodeSetup:
    """Random start behind ``leader``: speed near the leader's, spacing above the safe distance,
    random stop-line distance and signal clock. With probability ``p_free`` there is
    no leader and the start speed ranges up to twice the limit.

    With probability ``p_signal`` the start is instead placed shortly before an amber
    or red onset, close enough to the line that the phase change matters, with the
    leader already past the line.
    """
    if p_signal > 0 and rng.uniform() < p_signal:
        return _signal_setup(leader, cfg, rng, p_free)
    vl = float(leader.speed[0])
    v0 = float(np.clip(vl + rng.uniform(-3.0, 3.0), 0.0, cfg.v_limit))
    gap0 = d_safe(v0, vl, cfg) + float(rng.uniform(0.0, 40.0))
    if rng.uniform() < p_free:
        # open road, possibly above the limit, so the speed penalty gets seen
        gap0 = math.inf
        v0 = float(rng.uniform(0.0, FREE_SPEED_FACTOR * cfg.v_limit))
    d_tl0 = float(rng.uniform(20.0, cfg.d_entry))
    t0 = _on_grid(float(rng.uniform(0.0, cfg.schedule.cycle)), cfg.dt)
    return EpisodeSetup(leader, v0, d_tl0, t0, gap0, name="ou")


SIGNAL_LEAD_TIME = 2.0


def _signal_setup(leader, cfg: SimConfig, rng, p_free: float) -> EpisodeSetup:
    sched = cfg.schedule
    onset = sched.green_end if rng.uniform() < 0.5 else sched.amber_end
    lead = float(rng.uniform(0.0, SIGNAL_LEAD_TIME))
    v0 = float(rng.uniform(0.0, cfg.v_limit))
    d_tl0 = float(rng.uniform(2.0, ssd(v0, cfg) + v0 * lead + 20.0))
    gap0 = d_tl0 + float(rng.uniform(10.0, 200.0))
    if rng.uniform() < p_free:
        gap0 = math.inf
    t0 = _on_grid(onset - lead, cfg.dt)
    return EpisodeSetup(leader, v0, d_tl0, t0, gap0, name="ou_signal")


def pool_factory(pool, cfg: SimConfig, p_free: float = 0.0, p_signal: float = 0.0):
    """Episode factory drawing a leader uniformly from ``pool`` each call."""
    pool = list(pool)
    if not pool:
        raise ValueError("empty training corpus")

    def make(rng: np.random.Generator) -> EpisodeSetup:
        leader = pool[int(rng.integers(len(pool)))]
        return sample_setup(leader, cfg, rng, p_free, p_signal)

    return make


def pair_setup(pair: CfPair, cfg: SimConfig) -> EpisodeSetup:
    """Start the ego where the recorded follower started, against the recorded leader."""
    pair = resample(pair, cfg.dt)
    if pair.follower is None:
        raise ValueError(f"pair {pair.id!r} has no follower")
    f, lead = pair.follower, pair.leader
    gap0 = float(lead.position[0] - f.position[0])
    if gap0 <= 0:
        raise ValueError(f"pair {pair.id!r}: follower starts ahead of leader")
    t0 = _on_grid(pair.offset(cfg), cfg.dt)
    return EpisodeSetup(lead, float(f.speed[0]), float(-f.position[0]), t0, gap0, name=pair.id)


def corpus_factory(pairs, cfg: SimConfig, ou_leaders=(), p_free: float = 0.0, p_signal: float = 0.0):
    """Mixed factory: recorded pairs replay their own start, OU leaders get random starts."""
    pair_setups = [pair_setup(p, cfg) for p in pairs if p.follower is not None]
    ou = list(ou_leaders)
    n = len(pair_setups) + len(ou)
    if n == 0:
        raise ValueError("empty training corpus")

    def make(rng: np.random.Generator) -> EpisodeSetup:
        i = int(rng.integers(n))
        if i < len(pair_setups):
            return pair_setups[i]
        return sample_setup(ou[i - len(pair_setups)], cfg, rng, p_free, p_signal)

    return make


def grid_setup(desc: ScenarioDescriptor, cfg: SimConfig, duration: float = GRID_DURATION) -> EpisodeSetup:
    """Ego enters at the entry distance; its OU leader is already past the stop line."""
    p = OuParams.from_config(cfg, seed=desc.leader_seed)
    gap0 = cfg.d_entry + GRID_LEADER_BEYOND
    leader = gen_ou_trajectory(duration, p, desc.leader_speed)
    name = f"grid_t{desc.start_time:g}_v{desc.start_speed:g}"
    return EpisodeSetup(
        leader,
        desc.start_speed,
        cfg.d_entry,
        _on_grid(desc.start_time, cfg.dt),
        gap0,
        prev_accel=desc.start_accel,
        name=name,
    )


def critical_setup(cfg: SimConfig) -> EpisodeSetup:
    leader = critical_brake_profile(cfg)
    return EpisodeSetup(leader, CRITICAL_V0, CRITICAL_D_TL, 0.0, CRITICAL_GAP0, name="critical_brake")
