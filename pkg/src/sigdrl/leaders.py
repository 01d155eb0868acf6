"""Leader speed profiles: Ornstein-Uhlenbeck traffic, a scripted hard-braking run,
and the start-condition grid used for signal-compliance checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import SimConfig

SOURCES = ("real", "ou", "scripted")


@dataclass(frozen=True, eq=False)
class LeaderTrajectory:
    t: np.ndarray
    position: np.ndarray
    speed: np.ndarray
    source: str = "ou"

    def __post_init__(self):
        t, pos, v = (np.asarray(a, dtype=float) for a in (self.t, self.position, self.speed))
        if not (t.shape == pos.shape == v.shape) or t.ndim != 1:
            raise ValueError("t, position and speed must be equal-length 1-D arrays")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("trajectory time must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("trajectory speeds must be nonnegative")
        if self.source not in SOURCES:
            raise ValueError(f"unknown trajectory source {self.source!r}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "speed", v)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @classmethod
    def from_speeds(
        cls, speed, dt: float, t0: float = 0.0, p0: float = 0.0, source: str = "ou"
    ) -> "LeaderTrajectory":
        speed = np.asarray(speed, dtype=float)
        t = np.round(t0 + dt * np.arange(len(speed)), 9)
        return cls(t, trapezoid_positions(speed, dt, p0), speed, source)

    def shifted(self, dp: float) -> "LeaderTrajectory":
        return replace(self, position=self.position + dp)


def trapezoid_positions(speed: np.ndarray, dt: float, p0: float = 0.0) -> np.ndarray:
    pos = np.empty_like(speed, dtype=float)
    pos[0] = p0
    np.cumsum(0.5 * (speed[1:] + speed[:-1]) * dt, out=pos[1:])
    pos[1:] += p0
    return pos


@dataclass(frozen=True)
class OuParams:
    mu: float = 7.5
    theta: float = 2.0 / 15.0
    sigma: float = math.sqrt(15.0)
    accel_clip: float = 2.0
    v_floor: float = 0.0
    v_ceil: float = 15.0
    dt: float = 0.04
    seed: int = 0

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not self.accel_clip > 0:
            raise ValueError("accel_clip must be positive")
        if not self.v_floor < self.v_ceil:
            raise ValueError("v_floor must be below v_ceil")

    @classmethod
    def from_config(cls, cfg: SimConfig, seed: int = 0) -> "OuParams":
        a = abs(cfg.a_comf)
        return cls(
            mu=cfg.v_des / 2.0,
            theta=a / cfg.v_des,
            sigma=math.sqrt(cfg.v_des * a / 2.0),
            accel_clip=a,
            v_floor=0.0,
            v_ceil=cfg.v_limit,
            dt=cfg.dt,
            seed=seed,
        )

    def unclipped(self) -> "OuParams":
        return replace(self, accel_clip=math.inf, v_floor=-math.inf, v_ceil=math.inf)


def ou_step(v: float, p: OuParams, noise: float) -> float:
    """One Euler-Maruyama step with acceleration and speed clipping."""
    raw = v + p.theta * (p.mu - v) * p.dt + p.sigma * math.sqrt(p.dt) * noise
    accel = min(max((raw - v) / p.dt, -p.accel_clip), p.accel_clip)
    return min(max(v + accel * p.dt, p.v_floor), p.v_ceil)


def ou_speeds(n_steps: int, p: OuParams, start_speed: float) -> np.ndarray:
    noise = np.random.default_rng(p.seed).standard_normal(n_steps)
    v = np.empty(n_steps + 1)
    v[0] = start_speed
    if math.isinf(p.accel_clip) and math.isinf(p.v_floor) and math.isinf(p.v_ceil):
        # linear recursion; same arithmetic as ou_step without the clips
        decay = 1.0 - p.theta * p.dt
        drift = p.theta * p.mu * p.dt
        kick = p.sigma * math.sqrt(p.dt) * noise
        for k in range(n_steps):
            v[k + 1] = v[k] * decay + drift + kick[k]
        return v
    for k in range(n_steps):
        v[k + 1] = ou_step(v[k], p, noise[k])
    return v


def gen_ou_trajectory(
    duration: float, p: OuParams, start_speed: float, start_position: float = 0.0, t0: float = 0.0
) -> LeaderTrajectory:
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = round(duration / p.dt)
    if abs(n * p.dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"duration {duration} is not a multiple of dt={p.dt}")
    start = min(max(start_speed, p.v_floor), p.v_ceil)
    return LeaderTrajectory.from_speeds(ou_speeds(n, p, start), p.dt, t0, start_position, "ou")


@dataclass(frozen=True)
class SpeedEvent:
    """Constant acceleration from ``start`` until ``end`` or until ``target`` speed is reached."""

    start: float
    accel: float
    end: float | None = None
    target: float | None = None


CRITICAL_BRAKE_EVENTS = (
    SpeedEvent(18.0, -0.5, end=25.0),
    SpeedEvent(50.0, 1.0, end=55.0),
    SpeedEvent(62.0, -6.0, target=0.0),
    SpeedEvent(70.0, 1.0, target=11.0),
    SpeedEvent(98.0, -5.0, target=0.0),
    SpeedEvent(110.0, 1.0, target=11.0),
)


def scripted_profile(
    v0: float, events, duration: float, dt: float, source: str = "scripted"
) -> LeaderTrajectory:
    n = round(duration / dt)
    t = np.round(dt * np.arange(n + 1), 9)
    v = np.empty(n + 1)
    v[0] = v0
    finished: set[int] = set()
    eps = 1e-9
    for k in range(n):
        current = None
        for i, ev in enumerate(events):
            if i in finished or t[k] < ev.start - eps:
                continue
            if ev.end is not None and t[k] >= ev.end - eps:
                finished.add(i)
                continue
            current = i
        if current is None:
            v[k + 1] = v[k]
            continue
        ev = events[current]
        nxt = v[k] + ev.accel * dt
        if ev.target is not None:
            hit = nxt <= ev.target if ev.accel < 0 else nxt >= ev.target
            if hit:
                nxt = ev.target
                finished.add(current)
        v[k + 1] = max(0.0, nxt)
    return LeaderTrajectory(t, trapezoid_positions(v, dt), v, source)


def critical_brake_profile(cfg: SimConfig | None = None, duration: float = 200.0) -> LeaderTrajectory:
    dt = (cfg or SimConfig()).dt
    return scripted_profile(11.0, CRITICAL_BRAKE_EVENTS, duration, dt)


@dataclass(frozen=True)
class ScenarioDescriptor:
    start_time: float
    start_speed: float
    start_accel: float
    leader_speed: float
    leader_seed: int


DEFAULT_START_TIMES = (
    0.0, 5.0, 10.0, 15.0,
    16.0, 17.0, 18.0, 19.0, 20.0,
    22.5, 25.0, 27.5, 30.0, 35.0, 40.0, 45.0,
)
DEFAULT_START_SPEEDS = tuple(float(v) for v in range(0, 15, 2))


def signal_grid_scenarios(
    cfg: SimConfig | None = None,
    seed: int = 0,
    start_times=DEFAULT_START_TIMES,
    start_speeds=DEFAULT_START_SPEEDS,
    accel_range: tuple[float, float] = (0.0, 1.0),
) -> list[ScenarioDescriptor]:
    cfg = cfg or SimConfig()
    rng = np.random.default_rng(seed)
    out = []
    for t0 in start_times:
        for v0 in start_speeds:
            out.append(
                ScenarioDescriptor(
                    start_time=float(t0),
                    start_speed=float(v0),
                    start_accel=float(rng.uniform(*accel_range)),
                    leader_speed=float(rng.uniform(0.0, cfg.v_limit)),
                    leader_seed=int(rng.integers(2**31)),
                )
            )
    return out
