"""Point-mass kinematics around a single signalised stop line.

The ego vehicle reacts to whichever leader is nearest ahead: the recorded or
simulated leader, or a zero-length stationary vehicle standing on the stop line
while the signal demands a stop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PHASES, Phase, SignalSchedule, SimConfig

TIME_DECIMALS = 9


def signal_phase(t: float, schedule: SignalSchedule) -> Phase:
    if t < 0:
        raise ValueError("signal clock must be nonnegative")
    # rounding keeps right-open boundaries exact on the 0.04 s grid
    tc = round(math.fmod(round(t, TIME_DECIMALS), schedule.cycle), TIME_DECIMALS)
    if tc < schedule.green_end:
        return Phase.GREEN
    if tc < schedule.amber_end:
        return Phase.AMBER
    if tc < schedule.red_end:
        return Phase.RED
    # a cycle longer than red_end leaves an unassigned tail; treat it as green
    return Phase.GREEN


@dataclass(frozen=True)
class EnvState:
    """Kinematic state of one episode.

    ``gap`` and ``dv`` describe the real leader (``gap`` is ``inf`` when there is
    none); the virtual stop-line vehicle is derived on demand. ``amber_stop``
    latches the stop-or-go decision taken when the current amber began.
    """

    v_n: float
    dv: float
    gap: float
    d_tl: float
    light: Phase
    t: float
    prev_accel: float = 0.0
    amber_stop: bool | None = None

    @property
    def has_leader(self) -> bool:
        return math.isfinite(self.gap)

    @property
    def v_lead(self) -> float:
        return self.v_n + self.dv


@dataclass(frozen=True)
class LeaderKinematics:
    gap: float
    speed: float
    virtual: bool = False


def ssd(v: float, cfg: SimConfig) -> float:
    """Reaction plus comfortable-braking distance."""
    return v * cfg.t_react + v * v / (2.0 * abs(cfg.a_comf))


def amber_margin(state: EnvState, cfg: SimConfig) -> float:
    return state.d_tl - ssd(state.v_n, cfg)


def stop_required(state: EnvState, cfg: SimConfig) -> bool:
    if state.light is Phase.RED:
        return True
    if state.light is Phase.AMBER:
        if state.amber_stop is not None:
            return state.amber_stop
        return amber_margin(state, cfg) > 0
    return False


def real_leader(state: EnvState) -> LeaderKinematics | None:
    if not state.has_leader:
        return None
    return LeaderKinematics(state.gap, max(0.0, state.v_lead))


def virtual_leader(state: EnvState, cfg: SimConfig) -> LeaderKinematics | None:
    if 0 < state.d_tl <= cfg.d_influence and stop_required(state, cfg):
        return LeaderKinematics(state.d_tl, 0.0, virtual=True)
    return None


def effective_leader(
    state: EnvState, leader: LeaderKinematics | None, cfg: SimConfig
) -> LeaderKinematics | None:
    """Nearest of the real leader and the stop-line vehicle, or None."""
    virtual = virtual_leader(state, cfg)
    if leader is None:
        return virtual
    if virtual is None or leader.gap <= virtual.gap:
        return leader
    return virtual


def leader_ahead(state: EnvState, cfg: SimConfig) -> LeaderKinematics | None:
    return effective_leader(state, real_leader(state), cfg)


def d_safe(v_n: float, v_lead: float, cfg: SimConfig) -> float:
    raw = v_n * cfg.t_react + (v_n * v_n - v_lead * v_lead) / (2.0 * abs(cfg.a_min))
    return max(cfg.s0, raw)


def apply_mask(
    state: EnvState, proposed: float, leader: LeaderKinematics | None, cfg: SimConfig
) -> tuple[float, bool]:
    if leader is not None and leader.gap < d_safe(state.v_n, leader.speed, cfg):
        return cfg.a_min, True
    return proposed, False


def observe(state: EnvState, cfg: SimConfig) -> np.ndarray:
    """Scaled network input: speed, relative speed, spacing, stop-line distance, phase one-hot.

    Spacing refers to the effective leader and is capped at the influence
    distance; with nothing ahead the spacing reads as the cap with zero
    relative speed.
    """
    lead = leader_ahead(state, cfg)
    if lead is None:
        gap, dv = cfg.d_influence, 0.0
    else:
        gap, dv = min(lead.gap, cfg.d_influence), lead.speed - state.v_n
    d_tl = min(max(state.d_tl, -cfg.d_influence), cfg.d_entry)
    onehot = [1.0 if state.light is p else 0.0 for p in PHASES]
    return np.array(
        [
            state.v_n / cfg.v_limit,
            dv / cfg.v_limit,
            gap / cfg.d_influence,
            d_tl / cfg.d_entry,
            *onehot,
        ]
    )


OBS_DIM = 7
