"""Physical constants, reward weights and the signal schedule."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, fields, replace


class Phase(str, enum.Enum):
    GREEN = "green"
    AMBER = "amber"
    RED = "red"


PHASES = (Phase.GREEN, Phase.AMBER, Phase.RED)


@dataclass(frozen=True)
class SignalSchedule:
    """Fixed-time plan; phase boundaries are offsets from the start of green."""

    green_end: float = 16.0
    amber_end: float = 19.0
    red_end: float = 45.0
    cycle: float = 45.0

    def __post_init__(self):
        if not (0 < self.green_end < self.amber_end < self.red_end <= self.cycle):
            raise ValueError(f"invalid signal schedule {self}")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.04
    a_max: float = 2.0
    a_min: float = -4.0
    a_comf: float = -2.0
    v_limit: float = 15.0
    v_des: float = 15.0
    s0: float = 2.0
    t_headway: float = 1.5
    t_react: float = 1.5
    ttc_threshold: float = 4.0
    d_influence: float = 200.0
    d_entry: float = 350.0
    w1: float = 1.0
    w2: float = 1.5
    w3: float = 1.5
    w4: float = 0.3
    w5: float = 2.0
    w6: float = 2.0
    w7: float = 50.0
    schedule: SignalSchedule = field(default_factory=SignalSchedule)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.a_min < 0 < self.a_max:
            raise ValueError("need a_min < 0 < a_max")
        if not self.a_comf < 0:
            raise ValueError("a_comf must be negative")
        if not self.s0 > 0:
            raise ValueError("s0 must be positive")
        if not self.v_limit > 0:
            raise ValueError("v_limit must be positive")
        if min(self.weights) < 0:
            raise ValueError("reward weights must be nonnegative")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite")

    @property
    def weights(self) -> tuple[float, ...]:
        return (self.w1, self.w2, self.w3, self.w4, self.w5, self.w6, self.w7)

    @property
    def jerk_max(self) -> float:
        return (self.a_max - self.a_min) / self.dt

    def with_overrides(self, **kw) -> "SimConfig":
        sched = kw.pop("schedule", None)
        if isinstance(sched, dict):
            sched = replace(self.schedule, **sched)
        if sched is not None:
            kw["schedule"] = sched
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        sched = d.pop("schedule", None)
        cfg = cls(**{k: float(v) for k, v in d.items()})
        if sched is not None:
            cfg = replace(cfg, schedule=SignalSchedule(**{k: float(v) for k, v in sched.items()}))
        return cfg


DEFAULT_CONFIG = SimConfig()
