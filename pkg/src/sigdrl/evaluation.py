"""Policy rollouts, surrogate-safety metrics, ECDFs and the benchmark report bundle."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Phase, SimConfig
from .data import CfPair, resample
from .env import EpisodeSetup, IntersectionEnv
from .leaders import signal_grid_scenarios
from .rewards import RewardBreakdown
from .scenarios import critical_setup, grid_setup, pair_setup
from .sim import EnvState

TTC_MAX = 50.0
COMFORT_JERK = 1.5
TRACE_COLUMNS = [
    "t", "v", "position", "v_lead", "gap", "d_tl", "light", "action", "jerk", "mask",
    *RewardBreakdown.columns(),
]


@dataclass
class EpisodeTrace:
    """Per-step records of one rollout; row k describes the state after step k.

    ``initial`` holds the state before the first step, so ``d_tl`` and ``light``
    sequences for crossing checks start from it.
    """

    id: str
    initial: EnvState
    t: np.ndarray
    v: np.ndarray
    v_lead: np.ndarray
    gap: np.ndarray
    d_tl: np.ndarray
    light: list
    action: np.ndarray
    jerk: np.ndarray
    mask: np.ndarray
    rewards: list = field(default_factory=list)
    collision: bool = False
    red_violation: bool = False

    def __len__(self) -> int:
        return len(self.t)

    @property
    def position(self) -> np.ndarray:
        return -self.d_tl

    def rows(self):
        for k in range(len(self)):
            br = self.rewards[k].as_row() if self.rewards else [math.nan] * len(RewardBreakdown.columns())
            yield [
                self.t[k], self.v[k], -self.d_tl[k], self.v_lead[k], self.gap[k], self.d_tl[k],
                self.light[k].value, self.action[k], self.jerk[k], int(self.mask[k]), *br,
            ]


def _check_grid(leader, dt: float) -> None:
    if len(leader) < 2:
        raise ValueError("leader trajectory needs at least two samples")
    if not np.allclose(np.diff(leader.t), dt, rtol=0, atol=1e-6):
        raise ValueError(f"leader trajectory is not on the {dt} s grid")


def rollout(policy, setup: EpisodeSetup, cfg: SimConfig) -> EpisodeTrace:
    """Run a frozen policy (obs -> accel) with the mask active."""
    _check_grid(setup.leader, cfg.dt)
    env = IntersectionEnv(setup, cfg, mask=True)
    obs = env.reset()
    initial = env.state
    recs = {k: [] for k in ("t", "v", "v_lead", "gap", "d_tl", "light", "action", "mask")}
    rewards = []
    collided = False
    done = False
    while not done:
        obs, _, done, out = env.step(policy(obs))
        s = out.next
        recs["t"].append(s.t)
        recs["v"].append(s.v_n)
        recs["v_lead"].append(s.v_lead if s.has_leader else math.nan)
        recs["gap"].append(s.gap)
        recs["d_tl"].append(s.d_tl)
        recs["light"].append(s.light)
        recs["action"].append(out.applied_accel)
        recs["mask"].append(out.mask_applied)
        rewards.append(out.breakdown)
        collided = collided or out.collided
    action = np.array(recs["action"])
    trace = EpisodeTrace(
        id=setup.name or "episode",
        initial=initial,
        t=np.array(recs["t"]),
        v=np.array(recs["v"]),
        v_lead=np.array(recs["v_lead"]),
        gap=np.array(recs["gap"]),
        d_tl=np.array(recs["d_tl"]),
        light=recs["light"],
        action=action,
        jerk=jerk_from_actions(action, initial.prev_accel, cfg.dt),
        mask=np.array(recs["mask"], dtype=bool),
        rewards=rewards,
        collision=collided,
    )
    trace.red_violation = not signal_compliance(trace)
    return trace


def jerk_from_actions(action, prev_accel: float, dt: float) -> np.ndarray:
    a = np.asarray(action, dtype=float)
    return np.diff(np.concatenate([[prev_accel], a])) / dt


def signal_compliance(trace: EpisodeTrace) -> bool:
    """False iff some step takes the ego from upstream of the line to on/past it
    while either end of that step is in red."""
    d = np.concatenate([[trace.initial.d_tl], trace.d_tl])
    lights = [trace.initial.light, *trace.light]
    for k in range(len(d) - 1):
        if d[k] > 0 >= d[k + 1] and Phase.RED in (lights[k], lights[k + 1]):
            return False
    return True


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class Ecdf:
    x: np.ndarray
    f: np.ndarray

    def __call__(self, value) -> float:
        return float(np.searchsorted(self.x, value, side="right") / len(self.x))


def ecdf(samples) -> Ecdf:
    """Sorted samples with F(x_i) = #{x <= x_i}/n, so ties share a value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("ECDF of an empty sample")
    if not np.all(np.isfinite(x)):
        raise ValueError("ECDF samples must be finite")
    return Ecdf(x, np.searchsorted(x, x, side="right") / x.size)


def ttc_samples(gap, dv) -> np.ndarray:
    """Time to collision at closing steps with a real leader, restricted to [0, TTC_MAX]."""
    gap = np.asarray(gap, dtype=float)
    dv = np.asarray(dv, dtype=float)
    ok = np.isfinite(gap) & np.isfinite(dv) & (dv < 0) & (gap >= 0)
    with np.errstate(over="ignore"):
        ttc = gap[ok] / -dv[ok]
    return ttc[ttc <= TTC_MAX]


@dataclass
class MetricSamples:
    ttc: np.ndarray
    gap: np.ndarray
    jerk: np.ndarray
    collisions: int = 0

    @classmethod
    def empty(cls) -> "MetricSamples":
        return cls(np.empty(0), np.empty(0), np.empty(0))

    def extend(self, other: "MetricSamples") -> None:
        self.ttc = np.concatenate([self.ttc, other.ttc])
        self.gap = np.concatenate([self.gap, other.gap])
        self.jerk = np.concatenate([self.jerk, other.jerk])
        self.collisions += other.collisions


def trace_metrics(trace: EpisodeTrace) -> MetricSamples:
    lead = np.isfinite(trace.gap)
    dv = trace.v_lead - trace.v
    return MetricSamples(
        ttc=ttc_samples(trace.gap[lead], dv[lead]),
        gap=trace.gap[lead],
        jerk=np.asarray(trace.jerk, dtype=float),
        collisions=int(trace.collision),
    )


def human_metrics(pair: CfPair, dt: float) -> MetricSamples:
    """Same measurements on the recorded follower; jerk from the second speed difference."""
    if pair.follower is None:
        raise ValueError(f"pair {pair.id!r} has no recorded follower")
    pair = resample(pair, dt)
    f, lead = pair.follower, pair.leader
    gap = lead.position - f.position
    dv = lead.speed - f.speed
    jerk = np.diff(f.speed, 2) / (dt * dt)
    return MetricSamples(ttc_samples(gap, dv), gap, jerk, int(np.any(gap <= 0)))


@dataclass
class EcdfReport:
    ttc: Ecdf | None
    gap: Ecdf | None
    jerk: Ecdf | None
    mean_abs_jerk: float
    frac_comfortable_jerk: float
    min_gap: float
    collisions: int

    @classmethod
    def from_samples(cls, m: MetricSamples) -> "EcdfReport":
        absj = np.abs(m.jerk)
        return cls(
            ttc=ecdf(m.ttc) if m.ttc.size else None,
            gap=ecdf(m.gap) if m.gap.size else None,
            jerk=ecdf(m.jerk) if m.jerk.size else None,
            mean_abs_jerk=float(absj.mean()) if absj.size else math.nan,
            frac_comfortable_jerk=float(np.mean(absj < COMFORT_JERK)) if absj.size else math.nan,
            min_gap=float(m.gap.min()) if m.gap.size else math.nan,
            collisions=m.collisions,
        )


# -- report bundle -----------------------------------------------------------------

SUMMARY_COLUMNS = [
    "suite", "population", "episodes", "failures", "collisions", "red_violations",
    "min_gap", "mean_abs_jerk", "frac_comfortable_jerk", "min_action", "max_action",
]
GRID_COLUMNS = [
    "scenario", "start_time", "start_speed", "start_accel", "leader_speed", "leader_seed",
    "compliant", "collision", "crossed_line", "min_d_tl", "final_t",
]
SUITES = ("ecdf", "critical", "grid")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def write_trace(path, trace: EpisodeTrace) -> None:
    _write_csv(path, TRACE_COLUMNS, trace.rows())


def _ecdf_rows(reports: dict):
    for pop, e in reports.items():
        if e is None:
            continue
        for x, f in zip(e.x, e.f):
            yield [pop, x, f]


@dataclass
class Bundle:
    out_dir: Path
    summary: list = field(default_factory=list)
    grid: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    reports: dict = field(default_factory=dict)
    critical: EpisodeTrace | None = None

    @property
    def collisions(self) -> int:
        return sum(r[4] for r in self.summary if r[1] == "agent")


def _summary_row(suite, pop, traces, failures, report: EcdfReport | None = None):
    acts = np.concatenate([t.action for t in traces]) if traces else np.empty(0)
    if report is None:
        m = MetricSamples.empty()
        for t in traces:
            m.extend(trace_metrics(t))
        report = EcdfReport.from_samples(m)
    return [
        suite, pop, len(traces) + failures, failures, report.collisions,
        sum(int(t.red_violation) for t in traces), report.min_gap, report.mean_abs_jerk,
        report.frac_comfortable_jerk,
        float(acts.min()) if acts.size else math.nan, float(acts.max()) if acts.size else math.nan,
    ]


def run_benchmark_suite(
    policy,
    pairs,
    cfg: SimConfig,
    seed: int = 0,
    out_dir=None,
    suites=SUITES,
    plots: bool = False,
    grid_traces: bool = False,
) -> Bundle:
    """Evaluate ``policy`` on recorded test pairs, the hard-braking profile and the signal grid.

    A failing episode is logged in ``failures.csv`` and counted in the summary
    instead of aborting the bundle.
    """
    unknown = set(suites) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites {sorted(unknown)}")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "traces").mkdir(parents=True, exist_ok=True)
    bundle = Bundle(out)

    def attempt(name, fn):
        try:
            return fn()
        except (ValueError, FloatingPointError, RuntimeError) as exc:
            bundle.failures.append([name, type(exc).__name__, str(exc)])
            return None

    if "ecdf" in suites:
        agent_m, human_m = MetricSamples.empty(), MetricSamples.empty()
        traces, fails, h_fails = [], 0, 0
        for pair in pairs:
            tr = attempt(pair.id, lambda p=pair: rollout(policy, pair_setup(p, cfg), cfg))
            if tr is None:
                fails += 1
                continue
            traces.append(tr)
            agent_m.extend(trace_metrics(tr))
            hm = attempt(f"{pair.id}:human", lambda p=pair: human_metrics(p, cfg.dt))
            if hm is None:
                h_fails += 1
            else:
                human_m.extend(hm)
            if out is not None:
                write_trace(out / "traces" / f"{tr.id}.csv", tr)
        agent_r, human_r = EcdfReport.from_samples(agent_m), EcdfReport.from_samples(human_m)
        bundle.reports = {"agent": agent_r, "human": human_r}
        bundle.summary.append(_summary_row("ecdf", "agent", traces, fails, agent_r))
        row = _summary_row("ecdf", "human", [], h_fails, human_r)
        row[2] = len(pairs)
        bundle.summary.append(row)
        if out is not None:
            for metric in ("ttc", "gap", "jerk"):
                rep = {"agent": getattr(agent_r, metric), "human": getattr(human_r, metric)}
                _write_csv(out / f"ecdf_{metric}.csv", ["population", "value", "cdf"], _ecdf_rows(rep))

    if "critical" in suites:
        tr = attempt("critical_brake", lambda: rollout(policy, critical_setup(cfg), cfg))
        bundle.critical = tr
        bundle.summary.append(_summary_row("critical", "agent", [tr] if tr else [], int(tr is None)))
        if tr is not None and out is not None:
            write_trace(out / "traces" / f"{tr.id}.csv", tr)

    if "grid" in suites:
        traces, fails = [], 0
        for desc in signal_grid_scenarios(cfg, seed):
            setup = grid_setup(desc, cfg)
            tr = attempt(setup.name, lambda s=setup: rollout(policy, s, cfg))
            if tr is None:
                fails += 1
                bundle.grid.append([setup.name, desc.start_time, desc.start_speed, desc.start_accel,
                                    desc.leader_speed, desc.leader_seed, False, False, False, math.nan, math.nan])
                continue
            traces.append(tr)
            bundle.grid.append([
                tr.id, desc.start_time, desc.start_speed, desc.start_accel, desc.leader_speed,
                desc.leader_seed, not tr.red_violation, tr.collision, bool(tr.d_tl[-1] <= 0),
                float(tr.d_tl.min()), float(tr.t[-1]),
            ])
            if grid_traces and out is not None:
                write_trace(out / "traces" / f"{tr.id}.csv", tr)
        bundle.summary.append(_summary_row("grid", "agent", traces, fails))
        if out is not None:
            _write_csv(out / "grid_compliance.csv", GRID_COLUMNS, bundle.grid)

    if out is not None:
        _write_csv(out / "summary.csv", SUMMARY_COLUMNS, bundle.summary)
        if bundle.failures:
            _write_csv(out / "failures.csv", ["episode", "error", "message"], bundle.failures)
        if plots:
            write_plots(bundle)
    return bundle


def write_plots(bundle: Bundle) -> list:
    """One SVG step chart per ECDF metric, plus the hard-braking gap trace."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "sigdrl"
    written = []
    meta = {"Date": None}
    labels = {"ttc": "TTC [s]", "gap": "distance headway [m]", "jerk": "jerk [m/s^3]"}
    for metric, label in labels.items():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for pop, rep in bundle.reports.items():
            e = getattr(rep, metric)
            if e is not None:
                ax.step(e.x, e.f, where="post", label=pop)
        ax.set_xlabel(label)
        ax.set_ylabel("ECDF")
        ax.legend()
        path = bundle.out_dir / f"ecdf_{metric}.svg"
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        written.append(path)
    if bundle.critical is not None:
        tr = bundle.critical
        fig, ax = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
        ax[0].plot(tr.t, tr.v, label="ego")
        ax[0].plot(tr.t, tr.v_lead, label="leader")
        ax[0].set_ylabel("speed [m/s]")
        ax[0].legend()
        ax[1].plot(tr.t, tr.gap)
        ax[1].set_ylabel("gap [m]")
        ax[1].set_xlabel("t [s]")
        path = bundle.out_dir / "critical_brake.svg"
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
        written.append(path)
    return [os.fspath(p) for p in written]
