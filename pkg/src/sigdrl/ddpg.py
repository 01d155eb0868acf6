"""Deterministic actor-critic with target networks and decaying Gaussian exploration."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .config import SimConfig
from .replay import Batch, ReplayBuffer
from .sim import OBS_DIM


@dataclass(frozen=True)
class DdpgConfig:
    lr_actor: float = 0.001
    lr_critic: float = 0.0015
    gamma: float = 0.99
    var_init: float = 3.0
    var_decay: float = 0.0005
    decay_mode: str = "multiplicative"
    batch_size: int = 256
    tau: float = 0.001
    buffer_capacity: int = 150_000
    hidden: tuple[int, ...] = (30, 30, 30)
    dtype: str = "float32"

    def __post_init__(self):
        if self.decay_mode not in ("multiplicative", "linear"):
            raise ValueError(f"unknown decay mode {self.decay_mode!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


class DdpgAgent:
    algo = "ddpg"

    def __init__(self, sim: SimConfig, hp: DdpgConfig | None = None, seed: int = 0):
        self.sim = sim
        self.hp = hp = hp or DdpgConfig()
        self.seed = seed
        self.dtype = np.dtype(hp.dtype)
        self.a_mid = 0.5 * (sim.a_max + sim.a_min)
        self.a_half = 0.5 * (sim.a_max - sim.a_min)
        init_rng, noise_rng, buf_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
        self.noise_rng = noise_rng
        self.actor_spec = nn.mlp(OBS_DIM, hp.hidden, 1, bounds=(sim.a_min, sim.a_max))
        self.critic_spec = nn.mlp(OBS_DIM + 1, hp.hidden, 1)
        self.actor = nn.init_params(self.actor_spec, init_rng, self.dtype)
        self.critic = nn.init_params(self.critic_spec, init_rng, self.dtype)
        self.actor_target = nn.clone(self.actor)
        self.critic_target = nn.clone(self.critic)
        self.actor_opt = nn.AdamState.for_params(self.actor, hp.lr_actor)
        self.critic_opt = nn.AdamState.for_params(self.critic, hp.lr_critic)
        self.var = hp.var_init
        self.buffer = ReplayBuffer(hp.buffer_capacity, OBS_DIM, buf_rng, self.dtype)

    @property
    def batch_size(self) -> int:
        return self.hp.batch_size

    # -- acting -------------------------------------------------------------
    def policy(self, obs) -> np.ndarray:
        return nn.forward(self.actor_spec, self.actor, np.asarray(obs, self.dtype))[..., 0]

    def act(self, obs, explore: bool = False) -> float:
        a = float(self.policy(obs))
        if explore:
            a += float(self.noise_rng.normal(0.0, np.sqrt(self.var)))
        return min(max(a, self.sim.a_min), self.sim.a_max)

    def after_env_step(self) -> None:
        if self.hp.decay_mode == "multiplicative":
            self.var *= 1.0 - self.hp.var_decay
        else:
            self.var = max(0.0, self.var - self.hp.var_decay)

    # -- learning -----------------------------------------------------------
    def _critic_in(self, obs, act) -> np.ndarray:
        a = ((np.asarray(act, self.dtype) - self.a_mid) / self.a_half).reshape(-1, 1)
        return np.concatenate([np.asarray(obs, self.dtype).reshape(len(a), -1), a], axis=1)

    def q(self, obs, act, target: bool = False) -> np.ndarray:
        params = self.critic_target if target else self.critic
        return nn.forward(self.critic_spec, params, self._critic_in(obs, act))[:, 0]

    def td_target(self, rew, next_obs, done) -> np.ndarray:
        next_obs = np.asarray(next_obs, self.dtype).reshape(-1, OBS_DIM)
        a_next = nn.forward(self.actor_spec, self.actor_target, next_obs)[:, 0]
        q_next = self.q(next_obs, a_next, target=True)
        done = np.asarray(done, self.dtype)
        return np.asarray(rew, self.dtype) + self.hp.gamma * (1.0 - done) * q_next

    def critic_grads(self, batch: Batch, y: np.ndarray):
        x = self._critic_in(batch.obs, batch.act)
        q, cache = nn.forward_cache(self.critic_spec, self.critic, x)
        err = q[:, 0] - y
        loss = float(np.mean(err * err))
        grads, _ = nn.backward(self.critic_spec, self.critic, cache, (2.0 / len(y)) * err[:, None])
        return loss, grads

    def actor_grads(self, obs: np.ndarray):
        """Gradient of -mean Q(s, actor(s)) with respect to the actor parameters."""
        obs = np.asarray(obs, self.dtype)
        a, a_cache = nn.forward_cache(self.actor_spec, self.actor, obs)
        x = self._critic_in(obs, a[:, 0])
        q, c_cache = nn.forward_cache(self.critic_spec, self.critic, x)
        up = np.full_like(q, -1.0 / len(obs))
        _, dx = nn.backward(self.critic_spec, self.critic, c_cache, up, need_params=False)
        da = dx[:, -1:] / self.a_half
        grads, _ = nn.backward(self.actor_spec, self.actor, a_cache, da)
        return float(-q.mean()), grads

    def update(self, batch: Batch) -> dict:
        y = self.td_target(batch.rew, batch.next_obs, batch.done)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("non-finite TD target")
        c_loss, c_grads = self.critic_grads(batch, y)
        a_loss, a_grads = self.actor_grads(batch.obs)
        if not (np.isfinite(c_loss) and np.isfinite(a_loss)):
            raise FloatingPointError(f"non-finite loss: critic={c_loss}, actor={a_loss}")
        nn.adam_update(self.critic_opt, self.critic, c_grads)
        nn.adam_update(self.actor_opt, self.actor, a_grads)
        nn.soft_update(self.actor_target, self.actor, self.hp.tau)
        nn.soft_update(self.critic_target, self.critic, self.hp.tau)
        return {"critic_loss": c_loss, "actor_loss": a_loss}

    def log_fields(self) -> dict:
        return {"exploration_var": self.var}

    # -- persistence ----------------------------------------------------------
    def checkpoint(self) -> tuple[dict, dict]:
        meta = {
            "algo": self.algo,
            "seed": self.seed,
            "sim": self.sim.to_dict(),
            "hyper": asdict(self.hp),
            "actor_spec": nn.spec_dict(self.actor_spec),
            "critic_spec": nn.spec_dict(self.critic_spec),
            "var": self.var,
            "actor_opt": nn.adam_meta(self.actor_opt),
            "critic_opt": nn.adam_meta(self.critic_opt),
            "noise_rng": self.noise_rng.bit_generator.state,
            "buffer_rng": self.buffer.rng.bit_generator.state,
            "obs_scales": obs_scales(self.sim),
        }
        arrays = {}
        arrays.update(nn.param_arrays("actor", self.actor))
        arrays.update(nn.param_arrays("critic", self.critic))
        arrays.update(nn.param_arrays("actor_target", self.actor_target))
        arrays.update(nn.param_arrays("critic_target", self.critic_target))
        arrays.update(nn.adam_arrays("actor_opt", self.actor_opt))
        arrays.update(nn.adam_arrays("critic_opt", self.critic_opt))
        return meta, arrays

    @classmethod
    def from_checkpoint(cls, meta: dict, arrays: dict) -> "DdpgAgent":
        agent = cls(SimConfig.from_dict(meta["sim"]), DdpgConfig(**meta["hyper"]), meta["seed"])
        n = 2 * agent.actor_spec.n_layers
        agent.actor = nn.params_from("actor", arrays, n)
        agent.critic = nn.params_from("critic", arrays, n)
        agent.actor_target = nn.params_from("actor_target", arrays, n)
        agent.critic_target = nn.params_from("critic_target", arrays, n)
        agent.actor_opt = nn.adam_from("actor_opt", meta["actor_opt"], arrays)
        agent.critic_opt = nn.adam_from("critic_opt", meta["critic_opt"], arrays)
        agent.var = meta["var"]
        agent.noise_rng.bit_generator.state = meta["noise_rng"]
        agent.buffer.rng.bit_generator.state = meta["buffer_rng"]
        return agent


def obs_scales(sim: SimConfig) -> dict:
    return {"speed": sim.v_limit, "gap": sim.d_influence, "d_tl": sim.d_entry}
