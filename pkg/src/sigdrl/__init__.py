"""Car-following control through a signalised intersection with DDPG and SAC."""

from .config import DEFAULT_CONFIG, Phase, SignalSchedule, SimConfig
from .env import EpisodeSetup, IntersectionEnv, step
from .sim import EnvState, observe

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONFIG",
    "EnvState",
    "EpisodeSetup",
    "IntersectionEnv",
    "Phase",
    "SignalSchedule",
    "SimConfig",
    "observe",
    "step",
]
