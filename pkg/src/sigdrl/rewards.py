"""Per-step reward components and their weighted total."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

from .config import Phase, SimConfig
from .sim import EnvState, amber_margin, leader_ahead, ssd

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOGNORM_SIGMA = 1.0


@dataclass(frozen=True)
class RewardBreakdown:
    f_signal: float
    f_ttc: float
    f_eff: float
    f_acc: float
    f_jerk: float
    f_speed: float
    f_col: float
    total: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_row(self) -> tuple[float, ...]:
        return astuple(self)


def ttc(gap: float, dv: float) -> float | None:
    if dv < 0:
        return -gap / dv
    return None


def f_ttc(ttc_value: float | None, cfg: SimConfig) -> float:
    if ttc_value is None or not 0 <= ttc_value < cfg.ttc_threshold:
        return 0.0
    return (ttc_value / cfg.ttc_threshold) ** 2 - 1.0


def desired_gap(v: float, cfg: SimConfig) -> float:
    return cfg.s0 + v * cfg.t_headway


def lognormal_pdf(x: float, mu: float, sigma: float) -> float:
    z = (math.log(x) - mu) / sigma
    return math.exp(-0.5 * z * z) / (x * sigma * SQRT_2PI)


def f_eff(gap: float, v: float, cfg: SimConfig) -> float:
    """Headway efficiency: log-normal density with its mode at the desired gap, scaled to peak at 1."""
    if gap <= 0:
        raise ValueError("f_eff needs a positive gap")
    s_star = desired_gap(v, cfg)
    mu = math.log(s_star) + LOGNORM_SIGMA**2
    return lognormal_pdf(gap, mu, LOGNORM_SIGMA) / lognormal_pdf(s_star, mu, LOGNORM_SIGMA)


def f_signal(state: EnvState, action: float, cfg: SimConfig) -> float:
    # only the amber "go" branch is shaped here; stopping is handled by the
    # stop-line vehicle through f_eff / f_ttc
    if state.light is not Phase.AMBER or action >= 0 or state.d_tl <= 0:
        return 0.0
    go = (not state.amber_stop) if state.amber_stop is not None else amber_margin(state, cfg) <= 0
    if not go:
        return 0.0
    if state.has_leader and state.gap <= state.d_tl:
        return 0.0
    stop_dist = ssd(state.v_n, cfg)
    if stop_dist <= 0:
        return 0.0
    # the latched decision can outlive its premise d_tl <= SSD once the ego slows;
    # from then on stopping is comfortable again and braking costs nothing
    return min(0.0, (state.d_tl / stop_dist) ** 2 - 1.0)


def f_acc(action: float, cfg: SimConfig) -> float:
    if action <= 0:
        return -math.sqrt(action / cfg.a_min)
    return -math.sqrt(action / cfg.a_max)


def f_jerk(jerk: float, cfg: SimConfig) -> float:
    return -((abs(jerk) / cfg.jerk_max) ** 0.25)


def f_speed(v: float, cfg: SimConfig) -> float:
    if v > cfg.v_limit:
        return -(((v - cfg.v_limit) / cfg.v_limit) ** 2)
    return 0.0


def total_reward(
    state: EnvState, applied_action: float, prev_action: float, collided: bool, cfg: SimConfig
) -> RewardBreakdown:
    """Reward for arriving in ``state`` after executing ``applied_action``."""
    lead = leader_ahead(state, cfg)
    if lead is None or lead.gap <= 0:
        r_ttc, r_eff = 0.0, 1.0 if lead is None else 0.0
    else:
        r_ttc = f_ttc(ttc(lead.gap, lead.speed - state.v_n), cfg)
        r_eff = f_eff(lead.gap, state.v_n, cfg)
    parts = (
        f_signal(state, applied_action, cfg),
        r_ttc,
        r_eff,
        f_acc(applied_action, cfg),
        f_jerk((applied_action - prev_action) / cfg.dt, cfg),
        f_speed(state.v_n, cfg),
    )
    if collided:
        return RewardBreakdown(*parts, f_col=-1.0, total=cfg.w7 * -1.0)
    total = sum(w * p for w, p in zip(cfg.weights[:6], parts))
    return RewardBreakdown(*parts, f_col=0.0, total=total)
