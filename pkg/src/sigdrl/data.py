"""Car-following trajectory pairs: CSV I/O, resampling, train/test split.

CSV layout, one row per vehicle sample::

    pair_id,role,t,position_m,speed_mps[,source]

``role`` is ``leader`` or ``follower``. ``position_m`` is measured along the
approach with the stop line at 0, so upstream positions are negative and the
follower's distance to the stop line is ``-position_m``. The optional
``source`` column tags each pair as ``real``, ``ou`` or ``scripted``.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import SimConfig
from .leaders import LeaderTrajectory, OuParams, gen_ou_trajectory

HEADER = ["pair_id", "role", "t", "position_m", "speed_mps"]
ROLES = ("leader", "follower")
MANIFEST_HEADER = ["pair_id", "source", "split", "signal_offset", "file"]


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class CfPair:
    id: str
    leader: LeaderTrajectory
    follower: LeaderTrajectory | None = None
    signal_offset: float | None = None

    def offset(self, cfg: SimConfig) -> float:
        if self.signal_offset is not None:
            return self.signal_offset
        return float(self.leader.t[0]) % cfg.schedule.cycle

    @property
    def source(self) -> str:
        return self.leader.source


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectories(path, pairs, with_source: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER + (["source"] if with_source else []))
        for pair in pairs:
            for role, tr in (("leader", pair.leader), ("follower", pair.follower)):
                if tr is None:
                    continue
                for t, p, v in zip(tr.t, tr.position, tr.speed):
                    row = [pair.id, role, _fmt(t), _fmt(p), _fmt(v)]
                    if with_source:
                        row.append(tr.source)
                    w.writerow(row)


def load_trajectories(path) -> list[CfPair]:
    """Parse a trajectory CSV into pairs, in order of first appearance."""
    rows: dict[str, dict[str, list]] = {}
    sources: dict[tuple[str, str], str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if header[:5] != HEADER or len(header) not in (5, 6):
            raise DataError(f"{path}: expected header {','.join(HEADER)}[,source], got {header}")
        has_source = len(header) == 6
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
            pid, role = row[0], row[1]
            if role not in ROLES:
                raise DataError(f"row {lineno}: field 'role' must be leader or follower, got {role!r}")
            vals = []
            for name, raw in zip(HEADER[2:], row[2:5]):
                try:
                    x = float(raw)
                except ValueError:
                    raise DataError(f"row {lineno}: field {name!r} is not a number: {raw!r}") from None
                if not math.isfinite(x):
                    raise DataError(f"row {lineno}: field {name!r} is not finite")
                vals.append(x)
            if vals[2] < 0:
                raise DataError(f"row {lineno}: field 'speed_mps' is negative ({vals[2]})")
            rows.setdefault(pid, {"leader": [], "follower": []})[role].append(vals)
            if has_source:
                sources[(pid, role)] = row[5] or "real"

    pairs = []
    for pid, by_role in rows.items():
        trs = {}
        for role, samples in by_role.items():
            if not samples:
                continue
            arr = np.array(sorted(samples, key=lambda r: r[0]))
            if np.any(np.diff(arr[:, 0]) <= 0):
                raise DataError(f"pair {pid!r}: {role} time stamps are not strictly increasing")
            src = sources.get((pid, role), "real")
            try:
                trs[role] = LeaderTrajectory(arr[:, 0], arr[:, 1], arr[:, 2], src)
            except ValueError as exc:
                raise DataError(f"pair {pid!r}: {exc}") from None
        if "leader" not in trs:
            raise DataError(f"pair {pid!r}: no leader rows")
        pairs.append(CfPair(pid, trs["leader"], trs.get("follower")))
    return pairs


def _resample_one(tr: LeaderTrajectory, grid: np.ndarray, dt: float) -> LeaderTrajectory:
    if len(tr) == len(grid) and np.allclose(tr.t, grid, rtol=0, atol=1e-6):
        return tr
    pos = np.interp(grid, tr.t, tr.position)
    speed = np.empty_like(pos)
    speed[:-1] = np.diff(pos) / dt
    speed[-1] = speed[-2] if len(speed) > 1 else 0.0
    return LeaderTrajectory(grid, pos, np.maximum(speed, 0.0), tr.source)


def resample(pair: CfPair, dt: float) -> CfPair:
    """Put leader and follower on a common grid with spacing ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    trs = [tr for tr in (pair.leader, pair.follower) if tr is not None]
    if any(len(tr) < 2 for tr in trs):
        raise DataError(f"pair {pair.id!r}: resampling needs at least two samples")
    t0 = max(float(tr.t[0]) for tr in trs)
    t1 = min(float(tr.t[-1]) for tr in trs)
    n = int(math.floor((t1 - t0) / dt + 1e-6)) + 1
    if n < 2:
        raise DataError(f"pair {pair.id!r}: leader and follower overlap for less than one step")
    grid = np.round(t0 + dt * np.arange(n), 9)
    leader = _resample_one(pair.leader, grid, dt)
    follower = None if pair.follower is None else _resample_one(pair.follower, grid, dt)
    return replace(pair, leader=leader, follower=follower)


def split(pairs, train_fraction: float = 0.6, seed: int = 0):
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    pairs = list(pairs)
    n_train = int(math.floor(len(pairs) * train_fraction + 0.5))
    order = np.random.default_rng(seed).permutation(len(pairs))
    train = [pairs[i] for i in order[:n_train]]
    test = [pairs[i] for i in order[n_train:]]
    return train, test


def write_manifest(path, rows) -> None:
    """``rows``: iterable of dicts keyed by MANIFEST_HEADER."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=MANIFEST_HEADER, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in MANIFEST_HEADER})


def read_manifest(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def load_corpus(manifest_path, split_name: str | None = None) -> list[CfPair]:
    """Load every pair listed in a manifest, applying recorded signal offsets."""
    base = Path(manifest_path).parent
    entries = read_manifest(manifest_path)
    cache: dict[str, dict[str, CfPair]] = {}
    out = []
    for e in entries:
        if split_name is not None and e.get("split") != split_name:
            continue
        f = os.fspath(base / e["file"])
        if f not in cache:
            cache[f] = {p.id: p for p in load_trajectories(f)}
        try:
            pair = cache[f][e["pair_id"]]
        except KeyError:
            raise DataError(f"manifest lists {e['pair_id']!r} but {f} has no such pair") from None
        if e.get("signal_offset"):
            pair = replace(pair, signal_offset=float(e["signal_offset"]))
        out.append(pair)
    return out


def idm_follow(
    leader: LeaderTrajectory,
    gap0: float,
    v0: float,
    rng: np.random.Generator | None = None,
    v_des: float = 15.0,
    t_headway: float = 1.5,
    s0: float = 2.0,
    a: float = 1.0,
    b: float = 1.5,
    pos_noise: float = 0.0,
) -> LeaderTrajectory:
    """Intelligent-driver follower behind ``leader``; optional position noise mimics tracking error."""
    dt = float(leader.t[1] - leader.t[0])
    n = len(leader)
    x = np.empty(n)
    v = np.empty(n)
    x[0] = leader.position[0] - gap0
    v[0] = v0
    for k in range(n - 1):
        s = max(leader.position[k] - x[k], 1e-3)
        dv = v[k] - leader.speed[k]
        s_star = s0 + max(0.0, v[k] * t_headway + v[k] * dv / (2 * math.sqrt(a * b)))
        acc = a * (1 - (v[k] / v_des) ** 4 - (s_star / s) ** 2)
        acc = min(max(acc, -9.0), a)
        v[k + 1] = max(0.0, v[k] + acc * dt)
        x[k + 1] = x[k] + 0.5 * (v[k] + v[k + 1]) * dt
    if pos_noise > 0 and rng is not None:
        x = x + rng.normal(0.0, pos_noise, n)
        x = np.minimum(x, leader.position - 0.5)
        v = np.maximum(np.gradient(x, dt), 0.0)
    return LeaderTrajectory(leader.t, x, v, "real")


def synthetic_pairs(
    n: int, cfg: SimConfig | None = None, seed: int = 0, duration: float = 60.0, pos_noise: float = 0.05
) -> list[CfPair]:
    """Stand-in corpus: OU leaders followed by a noisy intelligent-driver model.

    The follower starts between 80 m and the entry distance upstream of the
    stop line; leader trajectories carry the ``real`` tag so the corpus
    exercises the same code path as recorded data.
    """
    cfg = cfg or SimConfig()
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        x_f = -rng.uniform(80.0, cfg.d_entry)
        v_f = rng.uniform(3.0, 13.0)
        gap = cfg.s0 + v_f * cfg.t_headway + rng.uniform(0.0, 25.0)
        p = OuParams.from_config(cfg, seed=int(rng.integers(2**31)))
        lead = gen_ou_trajectory(duration, p, v_f + rng.uniform(-1.0, 1.0), x_f + gap)
        t0 = float(np.round(rng.uniform(0.0, 10 * cfg.schedule.cycle) / cfg.dt) * cfg.dt)
        lead = LeaderTrajectory(np.round(lead.t + t0, 9), lead.position, lead.speed, "real")
        foll = idm_follow(lead, gap, v_f, rng, pos_noise=pos_noise)
        pairs.append(CfPair(f"pair{i:03d}", lead, foll))
    return pairs
