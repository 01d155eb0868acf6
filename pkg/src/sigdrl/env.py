"""Episode stepping: mask, kinematic update, signal latch and reward."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import Phase, SimConfig
from .leaders import LeaderTrajectory
from .rewards import RewardBreakdown, total_reward
from .sim import (
    TIME_DECIMALS,
    EnvState,
    amber_margin,
    apply_mask,
    leader_ahead,
    observe,
    signal_phase,
)


@dataclass(frozen=True)
class StepOutcome:
    next: EnvState
    breakdown: RewardBreakdown
    collided: bool
    terminated: bool
    mask_applied: bool
    applied_accel: float


def latch_amber(state: EnvState, cfg: SimConfig) -> EnvState:
    """Fix the stop-or-go choice at the first amber step; clear it otherwise."""
    if state.light is not Phase.AMBER:
        return state if state.amber_stop is None else replace(state, amber_stop=None)
    if state.amber_stop is not None:
        return state
    return replace(state, amber_stop=amber_margin(state, cfg) > 0)


def make_state(
    cfg: SimConfig,
    v0: float,
    d_tl0: float,
    t0: float,
    gap0: float = math.inf,
    v_lead0: float | None = None,
    prev_accel: float = 0.0,
) -> EnvState:
    dv = 0.0 if v_lead0 is None or not math.isfinite(gap0) else v_lead0 - v0
    t0 = round(t0, TIME_DECIMALS)
    state = EnvState(
        v_n=float(v0),
        dv=float(dv),
        gap=float(gap0),
        d_tl=float(d_tl0),
        light=signal_phase(t0, cfg.schedule),
        t=t0,
        prev_accel=float(prev_accel),
    )
    return latch_amber(state, cfg)


def ego_displacement(v: float, a: float, dt: float) -> float:
    if v + a * dt >= 0:
        return v * dt + 0.5 * a * dt * dt
    return v * v / (2.0 * -a)


def step(
    state: EnvState, action: float, leader_next_speed: float, cfg: SimConfig, mask: bool = True
) -> StepOutcome:
    if not (math.isfinite(action) and math.isfinite(leader_next_speed)):
        raise ValueError(f"non-finite step input: action={action}, leader speed={leader_next_speed}")
    if leader_next_speed < 0:
        raise ValueError("leader speed must be nonnegative")
    proposed = min(max(float(action), cfg.a_min), cfg.a_max)
    if mask:
        accel, masked = apply_mask(state, proposed, leader_ahead(state, cfg), cfg)
    else:
        accel, masked = proposed, False

    v_next = max(0.0, state.v_n + accel * cfg.dt)
    moved = ego_displacement(state.v_n, accel, cfg.dt)
    if state.has_leader:
        gap = state.gap + state.dv * cfg.dt
        dv = leader_next_speed - v_next
    else:
        gap, dv = math.inf, 0.0
    t = round(state.t + cfg.dt, TIME_DECIMALS)
    nxt = EnvState(
        v_n=v_next,
        dv=dv,
        gap=gap,
        d_tl=state.d_tl - moved,
        light=signal_phase(t, cfg.schedule),
        t=t,
        prev_accel=accel,
        amber_stop=state.amber_stop,
    )
    nxt = latch_amber(nxt, cfg)
    collided = state.has_leader and gap <= 0
    breakdown = total_reward(nxt, accel, state.prev_accel, collided, cfg)
    return StepOutcome(nxt, breakdown, collided, collided, masked, accel)


@dataclass(frozen=True)
class EpisodeSetup:
    """Everything needed to start an episode against a given leader."""

    leader: LeaderTrajectory
    v0: float
    d_tl0: float
    t0: float
    gap0: float
    prev_accel: float = 0.0
    name: str = ""

    def initial_state(self, cfg: SimConfig) -> EnvState:
        return make_state(
            cfg,
            self.v0,
            self.d_tl0,
            self.t0,
            gap0=self.gap0,
            v_lead0=float(self.leader.speed[0]),
            prev_accel=self.prev_accel,
        )


class IntersectionEnv:
    """Gym-style wrapper: ``reset()`` then ``step(accel)`` until ``done``."""

    def __init__(self, setup: EpisodeSetup, cfg: SimConfig, mask: bool = True):
        if len(setup.leader) < 2:
            raise ValueError("leader trajectory needs at least two samples")
        self.setup = setup
        self.cfg = cfg
        self.mask = mask
        self.reset()

    @property
    def max_steps(self) -> int:
        return len(self.setup.leader) - 1

    def reset(self) -> np.ndarray:
        self.state = self.setup.initial_state(self.cfg)
        self.k = 0
        self.done = False
        return observe(self.state, self.cfg)

    def step(self, action: float) -> tuple[np.ndarray, float, bool, StepOutcome]:
        if self.done:
            raise RuntimeError("episode already finished; call reset()")
        lead_v = float(self.setup.leader.speed[self.k + 1])
        out = step(self.state, action, lead_v, self.cfg, mask=self.mask)
        self.state = out.next
        self.k += 1
        self.done = out.terminated or self.k >= self.max_steps
        return observe(self.state, self.cfg), out.breakdown.total, self.done, out

