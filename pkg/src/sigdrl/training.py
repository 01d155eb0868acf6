"""Shared episode loop, training log and checkpoint I/O for both agents."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .config import SimConfig
from .ddpg import DdpgAgent, DdpgConfig
from .env import IntersectionEnv
from .sac import SacAgent, SacConfig

ROLLING_WINDOW = 100
LOG_COLUMNS = ["episode", "steps", "total_reward", "rolling_norm_reward", "collisions", "mask_activations"]
AGENTS = {"ddpg": (DdpgAgent, DdpgConfig), "sac": (SacAgent, SacConfig)}


class TrainingError(RuntimeError):
    pass


def make_agent(algo: str, sim: SimConfig, seed: int = 0, **hyper):
    try:
        cls, hp_cls = AGENTS[algo]
    except KeyError:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {sorted(AGENTS)}") from None
    return cls(sim, hp_cls(**hyper), seed)


def rolling_normalised(rewards, window: int = ROLLING_WINDOW) -> np.ndarray:
    """Trailing mean over up to ``window`` episodes, then min-max scaled to [0, 1]."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        return r
    c = np.concatenate([[0.0], np.cumsum(r)])
    idx = np.arange(1, r.size + 1)
    lo = np.maximum(0, idx - window)
    roll = (c[idx] - c[lo]) / (idx - lo)
    span = roll.max() - roll.min()
    if span == 0:
        return np.zeros_like(roll)
    return (roll - roll.min()) / span


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)
    extra_columns: list = field(default_factory=list)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r["total_reward"] for r in self.rows])

    def finalise(self) -> None:
        for row, v in zip(self.rows, rolling_normalised(self.rewards)):
            row["rolling_norm_reward"] = float(v)

    def write_csv(self, path) -> None:
        cols = LOG_COLUMNS + self.extra_columns
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows:
                w.writerow([_cell(row.get(c, "")) for c in cols])


def _cell(x):
    if isinstance(x, float):
        return repr(x)
    return x


def run_episode(agent, setup, cfg: SimConfig, explore: bool, learn: bool, mask: bool = True) -> dict:
    env = IntersectionEnv(setup, cfg, mask=mask)
    obs = env.reset()
    total = 0.0
    collisions = masks = steps = 0
    done = False
    while not done:
        a = agent.act(obs, explore=explore)
        nxt, r, done, out = env.step(a)
        if learn:
            agent.buffer.add(obs, out.applied_accel, r, nxt, out.collided)
            agent.after_env_step()
            if len(agent.buffer) >= agent.batch_size:
                try:
                    agent.update(agent.buffer.sample(agent.batch_size))
                except FloatingPointError as exc:
                    raise TrainingError(f"step {steps} of episode {setup.name!r}: {exc}") from exc
        total += r
        collisions += int(out.collided)
        masks += int(out.mask_applied)
        steps += 1
        obs = nxt
    return {"steps": steps, "total_reward": total, "collisions": collisions, "mask_activations": masks}


def train(agent, factory, episodes: int, seed: int = 0, mask: bool = True, log_path=None, progress=None) -> TrainingLog:
    """Run ``episodes`` learning episodes, each on a fresh setup from ``factory(rng)``.

    Reproducible given the agent's construction seed and ``seed``. When a
    contract violation aborts the run, the rows gathered so far are still
    written to ``log_path``.
    """
    if episodes < 0:
        raise ValueError("episode budget must be nonnegative")
    rng = np.random.default_rng(seed)
    log = TrainingLog(extra_columns=sorted(agent.log_fields()))
    try:
        for ep in range(episodes):
            setup = factory(rng)
            stats = run_episode(agent, setup, agent.sim, explore=True, learn=True, mask=mask)
            row = {"episode": ep + 1, **stats, "rolling_norm_reward": math.nan}
            row.update(agent.log_fields())
            log.rows.append(row)
            if progress is not None:
                progress(row)
    finally:
        log.finalise()
        if log_path is not None:
            log.write_csv(log_path)
    return log


def save_agent(agent, path) -> None:
    meta, arrays = agent.checkpoint()
    nn.save_checkpoint(path, meta, arrays)


def load_agent(path):
    meta, arrays = nn.load_checkpoint(path)
    try:
        cls = AGENTS[meta["algo"]][0]
    except KeyError:
        raise ValueError(f"{path}: unknown algorithm {meta.get('algo')!r}") from None
    return cls.from_checkpoint(meta, arrays)


class Policy:
    """Frozen deterministic controller loaded from a checkpoint."""

    def __init__(self, agent):
        self.agent = agent
        self.algo = agent.algo
        self.sim = agent.sim

    def __call__(self, obs) -> float:
        return self.agent.act(obs, explore=False)


def load_policy(path) -> Policy:
    return Policy(load_agent(path))
