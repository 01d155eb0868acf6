"""Small fully-connected networks with hand-written backprop, Adam and
soft target updates, plus a deterministic checkpoint container."""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "linear"
    output_bounds: tuple[float, float] | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"bad layer sizes {self.layer_sizes}")
        object.__setattr__(self, "layer_sizes", sizes)
        if self.hidden_activation not in ("relu", "tanh"):
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in ("linear", "bounded"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")
        if self.output_activation == "bounded":
            if self.output_bounds is None or not self.output_bounds[0] < self.output_bounds[1]:
                raise ValueError("bounded output needs (low, high) with low < high")
            object.__setattr__(self, "output_bounds", tuple(float(b) for b in self.output_bounds))

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        d = dict(d)
        d["layer_sizes"] = tuple(d["layer_sizes"])
        if d.get("output_bounds") is not None:
            d["output_bounds"] = tuple(d["output_bounds"])
        return cls(**d)


def mlp(n_in: int, hidden: list[int] | tuple[int, ...], n_out: int, bounds=None) -> MlpSpec:
    sizes = (n_in, *hidden, n_out)
    if bounds is None:
        return MlpSpec(sizes)
    return MlpSpec(sizes, output_activation="bounded", output_bounds=tuple(bounds))


def init_params(spec: MlpSpec, rng: np.random.Generator, dtype=np.float64, out_scale: float = 3e-3):
    """Uniform fan-in initialisation; the last layer is drawn from +-out_scale."""
    params = []
    sizes = spec.layer_sizes
    for i in range(spec.n_layers):
        lim = out_scale if i == spec.n_layers - 1 else 1.0 / np.sqrt(sizes[i])
        params.append(rng.uniform(-lim, lim, (sizes[i], sizes[i + 1])).astype(dtype))
        params.append(rng.uniform(-lim, lim, sizes[i + 1]).astype(dtype))
    return params


def _act(name, z):
    # z is a fresh matmul result, so activating in place is safe
    return np.maximum(z, 0.0, out=z) if name == "relu" else np.tanh(z, out=z)


def _check_input(spec: MlpSpec, x):
    x = np.asarray(x)
    if x.shape[-1] != spec.layer_sizes[0]:
        raise ValueError(f"input width {x.shape[-1]} != {spec.layer_sizes[0]}")
    return x


def forward_cache(spec: MlpSpec, params, x):
    """Forward pass keeping what backprop needs. ``x`` is (batch, n_in) or (n_in,)."""
    x = _check_input(spec, x)
    h = x
    hs = [x]
    last = spec.n_layers - 1
    for i in range(spec.n_layers):
        z = h @ params[2 * i]
        z += params[2 * i + 1]
        if i < last:
            h = _act(spec.hidden_activation, z)
            hs.append(h)
    if spec.output_activation == "bounded":
        lo, hi = spec.output_bounds
        th = np.tanh(z)
        y = lo + (hi - lo) * 0.5 * (th + 1.0)
        return y, (hs, th)
    return z, (hs, None)


def forward(spec: MlpSpec, params, x):
    return forward_cache(spec, params, x)[0]


def backward(spec: MlpSpec, params, cache, upstream, need_params: bool = True):
    """Reverse pass for ``sum(upstream * y)``; returns (param grads or None, input grad)."""
    hs, th = cache
    g = np.asarray(upstream, dtype=hs[-1].dtype)
    if spec.output_activation == "bounded":
        lo, hi = spec.output_bounds
        g = g * (0.5 * (hi - lo) * (1.0 - th * th))
    grads = [None] * len(params) if need_params else None
    batched = g.ndim == 2
    for i in range(spec.n_layers - 1, -1, -1):
        h = hs[i]
        if need_params:
            if batched:
                grads[2 * i] = h.T @ g
                grads[2 * i + 1] = g.sum(axis=0)
            else:
                grads[2 * i] = np.outer(h, g)
                grads[2 * i + 1] = g.copy()
        g = g @ params[2 * i].T
        if i > 0:
            if spec.hidden_activation == "relu":
                np.multiply(g, h > 0, out=g)
            else:
                g *= 1.0 - h * h
    return grads, g


def cache_rows(cache, idx):
    """Restrict a batched forward cache to the rows in ``idx``."""
    hs, th = cache
    return [h[idx] for h in hs], None if th is None else th[idx]


def gradients(spec: MlpSpec, params, x, upstream):
    _, cache = forward_cache(spec, params, x)
    return backward(spec, params, cache, upstream)


def clone(params):
    return [p.copy() for p in params]


def soft_update(target, online, tau: float):
    """target <- tau * online + (1 - tau) * target, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for t, o in zip(target, online):
        if t.shape != o.shape:
            raise ValueError("target/online shape mismatch")
        t *= 1.0 - tau
        t += tau * o
    return target


@dataclass
class AdamState:
    lr: float
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr: float, **kw) -> "AdamState":
        return cls(lr, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_update(state: AdamState, params, grads):
    """Bias-corrected Adam step applied in place; returns (params, state)."""
    if len(grads) != len(params):
        raise ValueError("gradient/parameter count mismatch")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient passed to Adam")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError("gradient/parameter shape mismatch")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= (state.lr / c1) * m / (np.sqrt(v / c2) + state.eps)
    return params, state


def adam_arrays(prefix: str, st: AdamState) -> dict:
    out = {}
    for i, (m, v) in enumerate(zip(st.m, st.v)):
        out[f"{prefix}.m{i}"] = m
        out[f"{prefix}.v{i}"] = v
    return out


def adam_meta(st: AdamState) -> dict:
    return {"lr": st.lr, "step": st.step, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps, "n": len(st.m)}


def adam_from(prefix: str, meta: dict, arrays: dict) -> AdamState:
    n = meta["n"]
    return AdamState(
        meta["lr"],
        [arrays[f"{prefix}.m{i}"] for i in range(n)],
        [arrays[f"{prefix}.v{i}"] for i in range(n)],
        meta["step"],
        meta["beta1"],
        meta["beta2"],
        meta["eps"],
    )


def param_arrays(prefix: str, params) -> dict:
    return {f"{prefix}.{i}": p for i, p in enumerate(params)}


def params_from(prefix: str, arrays: dict, n: int):
    return [arrays[f"{prefix}.{i}"] for i in range(n)]


def spec_dict(spec: MlpSpec) -> dict:
    return asdict(spec)


# zip members get a fixed timestamp so identical content gives identical bytes
_ZIP_TIME = (1980, 1, 1, 0, 0, 0)


def save_checkpoint(path, meta: dict, arrays: dict) -> None:
    """Write ``meta`` (JSON) and named arrays (.npy members) to a zip container."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        header = {"format": "sigdrl-checkpoint", "version": CHECKPOINT_VERSION, "meta": meta}
        info = zipfile.ZipInfo("meta.json", date_time=_ZIP_TIME)
        zf.writestr(info, json.dumps(header, sort_keys=True, indent=1))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"arrays/{name}.npy", date_time=_ZIP_TIME), buf.getvalue())


def load_checkpoint(path) -> tuple[dict, dict]:
    with zipfile.ZipFile(path) as zf:
        header = json.loads(zf.read("meta.json"))
        if header.get("format") != "sigdrl-checkpoint":
            raise ValueError(f"{path} is not a checkpoint")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        arrays = {}
        for name in zf.namelist():
            if name.startswith("arrays/"):
                arrays[name[len("arrays/") : -len(".npy")]] = np.lib.format.read_array(
                    io.BytesIO(zf.read(name)), allow_pickle=False
                )
    return header["meta"], arrays
