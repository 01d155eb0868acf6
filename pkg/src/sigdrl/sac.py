"""Soft actor-critic: squashed Gaussian policy, twin critics, learned temperature."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .config import SimConfig
from .ddpg import obs_scales
from .replay import Batch, ReplayBuffer
from .sim import OBS_DIM

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SacConfig:
    lr_actor: float = 0.001
    lr_critic: float = 0.002
    lr_alpha: float = 0.001
    gamma: float = 0.99
    batch_size: int = 512
    tau: float = 0.001
    buffer_capacity: int = 300_000
    hidden: tuple[int, ...] = (128, 128, 128, 128, 128)
    log_alpha_init: float = -2.0
    target_entropy: float = -2.0
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    warmup_random_steps: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.log_std_min < self.log_std_max:
            raise ValueError("log_std_min must be below log_std_max")


def log1m_tanh2(u):
    """log(1 - tanh(u)^2) without cancellation for large |u|."""
    u = np.abs(u)
    return 2.0 * (math.log(2.0) - u - np.log1p(np.exp(-2.0 * u)))


class SacAgent:
    algo = "sac"

    def __init__(self, sim: SimConfig, hp: SacConfig | None = None, seed: int = 0):
        self.sim = sim
        self.hp = hp = hp or SacConfig()
        self.seed = seed
        self.dtype = np.dtype(hp.dtype)
        self.a_mid = 0.5 * (sim.a_max + sim.a_min)
        self.a_half = 0.5 * (sim.a_max - sim.a_min)
        init_rng, noise_rng, buf_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))
        self.noise_rng = noise_rng
        self.actor_spec = nn.mlp(OBS_DIM, hp.hidden, 2)
        self.critic_spec = nn.mlp(OBS_DIM + 1, hp.hidden, 1)
        self.actor = nn.init_params(self.actor_spec, init_rng, self.dtype)
        self.q1 = nn.init_params(self.critic_spec, init_rng, self.dtype)
        self.q2 = nn.init_params(self.critic_spec, init_rng, self.dtype)
        self.q1_target = nn.clone(self.q1)
        self.q2_target = nn.clone(self.q2)
        self.actor_opt = nn.AdamState.for_params(self.actor, hp.lr_actor)
        self.q1_opt = nn.AdamState.for_params(self.q1, hp.lr_critic)
        self.q2_opt = nn.AdamState.for_params(self.q2, hp.lr_critic)
        self.log_alpha = np.array([hp.log_alpha_init], dtype=np.float64)
        self.alpha_opt = nn.AdamState.for_params([self.log_alpha], hp.lr_alpha)
        self.buffer = ReplayBuffer(hp.buffer_capacity, OBS_DIM, buf_rng, self.dtype)
        self.env_steps = 0
        self.last_entropy = float("nan")

    @property
    def batch_size(self) -> int:
        return self.hp.batch_size

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    # -- policy ---------------------------------------------------------------
    def _heads(self, obs, params=None):
        out, cache = nn.forward_cache(self.actor_spec, self.actor if params is None else params, obs)
        mean = out[..., 0]
        raw_ls = out[..., 1]
        log_std = np.clip(raw_ls, self.hp.log_std_min, self.hp.log_std_max)
        return mean, log_std, raw_ls, cache

    def log_prob(self, u, eps, log_std):
        """Log-density of the squashed action given the pre-squash draw u = mean + std*eps."""
        return -0.5 * eps * eps - log_std - _HALF_LOG_2PI - math.log(self.a_half) - log1m_tanh2(u)

    def sample_action(self, obs, deterministic: bool = False, eps=None):
        """Returns (action, log-probability); works on one observation or a batch."""
        obs = np.asarray(obs, self.dtype)
        mean, log_std, _, _ = self._heads(obs)
        if deterministic:
            eps = np.zeros_like(mean)
        elif eps is None:
            eps = self.noise_rng.standard_normal(np.shape(mean)).astype(self.dtype)
        u = mean + np.exp(log_std) * eps
        a = self.a_mid + self.a_half * np.tanh(u)
        a = np.clip(a, self.sim.a_min, self.sim.a_max)
        return a, self.log_prob(u, eps, log_std)

    def policy(self, obs) -> np.ndarray:
        return self.sample_action(obs, deterministic=True)[0]

    def act(self, obs, explore: bool = False) -> float:
        if explore and self.env_steps < self.hp.warmup_random_steps:
            return float(self.noise_rng.uniform(self.sim.a_min, self.sim.a_max))
        a, _ = self.sample_action(obs, deterministic=not explore)
        return float(a)

    def after_env_step(self) -> None:
        self.env_steps += 1

    # -- critics --------------------------------------------------------------
    def _critic_in(self, obs, act) -> np.ndarray:
        a = ((np.asarray(act, self.dtype) - self.a_mid) / self.a_half).reshape(-1, 1)
        return np.concatenate([np.asarray(obs, self.dtype).reshape(len(a), -1), a], axis=1)

    def q(self, params, obs, act) -> np.ndarray:
        return nn.forward(self.critic_spec, params, self._critic_in(obs, act))[:, 0]

    def q_target(self, rew, next_obs, done) -> np.ndarray:
        next_obs = np.asarray(next_obs, self.dtype).reshape(-1, OBS_DIM)
        a_next, logp_next = self.sample_action(next_obs)
        qmin = np.minimum(self.q(self.q1_target, next_obs, a_next), self.q(self.q2_target, next_obs, a_next))
        soft = qmin - self.alpha * logp_next
        done = np.asarray(done, self.dtype)
        return np.asarray(rew, self.dtype) + self.hp.gamma * (1.0 - done) * soft

    def critic_grads(self, params, batch: Batch, y):
        """Loss 0.5*mean((Q - y)^2) and its parameter gradients."""
        q, cache = nn.forward_cache(self.critic_spec, params, self._critic_in(batch.obs, batch.act))
        err = q[:, 0] - y
        grads, _ = nn.backward(self.critic_spec, params, cache, err[:, None] / len(y))
        return float(0.5 * np.mean(err * err)), grads

    def actor_grads(self, obs, eps=None):
        """Loss mean(alpha*logp - min(Q1, Q2)) through the reparameterised sample.

        Returns (loss, grads, logp) with logp detached for the temperature step.
        """
        obs = np.asarray(obs, self.dtype)
        n = len(obs)
        mean, log_std, raw_ls, cache = self._heads(obs)
        if eps is None:
            eps = self.noise_rng.standard_normal(n).astype(self.dtype)
        std = np.exp(log_std)
        u = mean + std * eps
        t = np.tanh(u)
        a = self.a_mid + self.a_half * t
        logp = self.log_prob(u, eps, log_std)

        x = self._critic_in(obs, a)
        q1, c1 = nn.forward_cache(self.critic_spec, self.q1, x)
        q2, c2 = nn.forward_cache(self.critic_spec, self.q2, x)
        # the min routes each row's gradient through one critic only
        pick1 = q1[:, 0] <= q2[:, 0]
        dq_da = np.zeros(n, self.dtype)
        for params, c_cache, rows in ((self.q1, c1, pick1), (self.q2, c2, ~pick1)):
            idx = np.flatnonzero(rows)
            if idx.size:
                up = np.ones((idx.size, 1), self.dtype)
                _, dx = nn.backward(self.critic_spec, params, nn.cache_rows(c_cache, idx), up, need_params=False)
                dq_da[idx] = dx[:, -1]
        # critic input is tanh(u) itself, so dQ/du = dQ/dx * (1 - t^2)
        dq_du = dq_da * (1.0 - t * t)
        alpha = self.alpha
        g_u = (alpha * 2.0 * t - dq_du) / n
        g_mean = g_u
        g_ls = -alpha / n + g_u * std * eps
        g_ls = g_ls * ((raw_ls >= self.hp.log_std_min) & (raw_ls <= self.hp.log_std_max))
        up = np.stack([g_mean, g_ls], axis=1).astype(self.dtype)
        grads, _ = nn.backward(self.actor_spec, self.actor, cache, up)
        qmin = np.minimum(q1[:, 0], q2[:, 0])
        loss = float(np.mean(alpha * logp - qmin))
        return loss, grads, logp

    def alpha_grad(self, logp) -> float:
        """d/d(log alpha) of mean(-alpha*(logp + target_entropy))."""
        return float(-self.alpha * np.mean(np.asarray(logp, np.float64) + self.hp.target_entropy))

    def update(self, batch: Batch) -> dict:
        y = self.q_target(batch.rew, batch.next_obs, batch.done)
        if not np.all(np.isfinite(y)):
            raise FloatingPointError("non-finite TD target")
        l1, g1 = self.critic_grads(self.q1, batch, y)
        l2, g2 = self.critic_grads(self.q2, batch, y)
        if not (np.isfinite(l1) and np.isfinite(l2)):
            raise FloatingPointError(f"non-finite critic loss: q1={l1}, q2={l2}")
        nn.adam_update(self.q1_opt, self.q1, g1)
        nn.adam_update(self.q2_opt, self.q2, g2)
        a_loss, a_grads, logp = self.actor_grads(batch.obs)
        if not np.isfinite(a_loss):
            raise FloatingPointError(f"non-finite actor loss {a_loss}")
        nn.adam_update(self.actor_opt, self.actor, a_grads)
        nn.adam_update(self.alpha_opt, [self.log_alpha], [np.array([self.alpha_grad(logp)])])
        nn.soft_update(self.q1_target, self.q1, self.hp.tau)
        nn.soft_update(self.q2_target, self.q2, self.hp.tau)
        self.last_entropy = float(-np.mean(logp))
        return {"critic_loss": 0.5 * (l1 + l2), "actor_loss": a_loss, "alpha": self.alpha, "entropy": self.last_entropy}

    def log_fields(self) -> dict:
        return {"alpha": self.alpha, "entropy": self.last_entropy}

    # -- persistence ------------------------------------------------------------
    def checkpoint(self) -> tuple[dict, dict]:
        meta = {
            "algo": self.algo,
            "seed": self.seed,
            "sim": self.sim.to_dict(),
            "hyper": asdict(self.hp),
            "actor_spec": nn.spec_dict(self.actor_spec),
            "critic_spec": nn.spec_dict(self.critic_spec),
            "env_steps": self.env_steps,
            "last_entropy": self.last_entropy,
            "opts": {k: nn.adam_meta(getattr(self, k)) for k in ("actor_opt", "q1_opt", "q2_opt", "alpha_opt")},
            "noise_rng": self.noise_rng.bit_generator.state,
            "buffer_rng": self.buffer.rng.bit_generator.state,
            "obs_scales": obs_scales(self.sim),
        }
        arrays = {"log_alpha": self.log_alpha}
        for k in ("actor", "q1", "q2", "q1_target", "q2_target"):
            arrays.update(nn.param_arrays(k, getattr(self, k)))
        for k in ("actor_opt", "q1_opt", "q2_opt", "alpha_opt"):
            arrays.update(nn.adam_arrays(k, getattr(self, k)))
        return meta, arrays

    @classmethod
    def from_checkpoint(cls, meta: dict, arrays: dict) -> "SacAgent":
        agent = cls(SimConfig.from_dict(meta["sim"]), SacConfig(**meta["hyper"]), meta["seed"])
        n = 2 * agent.actor_spec.n_layers
        for k in ("actor", "q1", "q2", "q1_target", "q2_target"):
            setattr(agent, k, nn.params_from(k, arrays, n))
        for k, m in meta["opts"].items():
            setattr(agent, k, nn.adam_from(k, m, arrays))
        agent.log_alpha = np.array(arrays["log_alpha"], dtype=np.float64)
        agent.env_steps = meta["env_steps"]
        agent.last_entropy = meta["last_entropy"]
        agent.noise_rng.bit_generator.state = meta["noise_rng"]
        agent.buffer.rng.bit_generator.state = meta["buffer_rng"]
        return agent
