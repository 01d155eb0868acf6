import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles as o
from sigdrl.config import Phase, SimConfig
from sigdrl.data import CfPair
from sigdrl.env import EpisodeSetup
from sigdrl.evaluation import (
    COMFORT_JERK,
    TTC_MAX,
    EcdfReport,
    EpisodeTrace,
    MetricSamples,
    ecdf,
    human_metrics,
    jerk_from_actions,
    rollout,
    run_benchmark_suite,
    signal_compliance,
    trace_metrics,
    ttc_samples,
)
from sigdrl.leaders import LeaderTrajectory
from sigdrl.sim import EnvState

CFG = SimConfig()


def hand_trace():
    v = np.full(10, o.HAND_V)
    dv = np.array(o.HAND_DV)
    actions = np.array(o.HAND_ACTIONS)
    initial = EnvState(o.HAND_V, -1.0, 31.0, 100.0, Phase.GREEN, 0.0, prev_accel=0.0)
    return EpisodeTrace(
        id="hand",
        initial=initial,
        t=o.HAND_DT * np.arange(1, 11),
        v=v,
        v_lead=v + dv,
        gap=np.array(o.HAND_GAP),
        d_tl=np.linspace(99.0, 90.0, 10),
        light=[Phase.GREEN] * 10,
        action=actions,
        jerk=jerk_from_actions(actions, 0.0, o.HAND_DT),
        mask=np.zeros(10, bool),
    )


def _lights_trace(d_tl, lights, d0, light0):
    n = len(d_tl)
    z = np.zeros(n)
    return EpisodeTrace("x", EnvState(5.0, 0.0, math.inf, d0, light0, 0.0), z, z, z, z,
                        np.array(d_tl, float), lights, z, z, np.zeros(n, bool))


# -- ECDF ------------------------------------------------------------------------------


def test_ecdf_examples():
    e = ecdf([3, 1, 2])
    assert e.x.tolist() == [1, 2, 3]
    assert np.allclose(e.f, [1 / 3, 2 / 3, 1])
    tied = ecdf([1, 1, 2])
    assert np.allclose(tied.f, [2 / 3, 2 / 3, 1])
    assert tied(0.5) == 0 and tied(1) == pytest.approx(2 / 3) and tied(9) == 1


def test_ecdf_rejects_bad_samples():
    with pytest.raises(ValueError):
        ecdf([])
    with pytest.raises(ValueError):
        ecdf([1.0, math.nan])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60))
def test_ecdf_properties(xs):
    e = ecdf(xs)
    assert np.all(np.diff(e.x) >= 0) and np.all(np.diff(e.f) >= 0)
    assert e.f[-1] == 1.0 and e.f[0] >= 1 / len(xs)
    for x, f in zip(e.x, e.f):
        assert f == sum(1 for y in xs if y <= x) / len(xs)


# -- hand-built trace -------------------------------------------------------------------


def test_hand_trace_metrics_exact():
    m = trace_metrics(hand_trace())
    assert sorted(m.ttc.tolist()) == o.HAND_TTC
    assert sorted(m.gap.tolist()) == o.HAND_GAPS_SORTED
    assert m.jerk.tolist() == o.HAND_JERK
    rep = EcdfReport.from_samples(m)
    assert rep.ttc.f.tolist() == [0.25, 0.5, 0.75, 1.0]
    assert rep.gap.f.tolist() == [k / 9 for k in range(1, 10)]
    for x, f in o.HAND_JERK_ECDF.items():
        assert rep.jerk(x) == f
    assert rep.mean_abs_jerk == o.HAND_MEAN_ABS_JERK
    assert rep.frac_comfortable_jerk == o.HAND_FRAC_COMFORT
    assert rep.min_gap == 3.0 and rep.collisions == 0


@given(st.lists(st.tuples(st.floats(0, 1e4), st.floats(-50, 50)), max_size=50))
def test_ttc_pool_respects_clip(rows):
    gap = np.array([r[0] for r in rows])
    dv = np.array([r[1] for r in rows])
    ttc = ttc_samples(gap, dv)
    assert np.all((ttc >= 0) & (ttc <= TTC_MAX))
    expect = [g / -d for g, d in rows if d < 0 and g / -d <= TTC_MAX]
    assert sorted(ttc.tolist()) == sorted(expect)


def test_comfort_threshold():
    assert COMFORT_JERK == 1.5


def test_human_metrics_second_difference():
    dt = CFG.dt
    v = np.array([10.0, 10.0, 10.04, 10.12, 10.2])
    f = LeaderTrajectory.from_speeds(v, dt, source="real")
    lead = LeaderTrajectory.from_speeds(np.full(5, 12.0), dt, p0=20.0, source="real")
    m = human_metrics(CfPair("p", lead, f), dt)
    assert np.allclose(m.jerk, np.diff(v, 2) / dt**2)
    assert np.allclose(m.gap, lead.position - f.position)
    assert m.ttc.size == 0
    with pytest.raises(ValueError):
        human_metrics(CfPair("q", lead), dt)


# -- compliance ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "d0,light0,d,lights,ok",
    [
        (1.0, Phase.RED, [0.5], [Phase.RED], True),  # approaches but never reaches the line
        (0.5, Phase.RED, [0.0], [Phase.RED], False),  # touching the line counts
        (0.5, Phase.GREEN, [-0.5], [Phase.GREEN], True),
        (0.5, Phase.AMBER, [-0.5], [Phase.AMBER], True),
        (0.5, Phase.GREEN, [-0.5], [Phase.RED], False),  # red at the end of the step
        (0.5, Phase.RED, [-0.5], [Phase.GREEN], False),  # red at the start of the step
        (-1.0, Phase.RED, [-2.0], [Phase.RED], True),  # already past the line
        (0.0, Phase.RED, [-1.0], [Phase.RED], True),  # started on the line
    ],
)
def test_signal_compliance_cases(d0, light0, d, lights, ok):
    assert signal_compliance(_lights_trace(d, lights, d0, light0)) is ok


# -- rollouts and the report bundle -----------------------------------------------------


def test_rollout_rejects_bad_leaders():
    one = LeaderTrajectory.from_speeds(np.array([5.0]), CFG.dt)
    with pytest.raises(ValueError):
        rollout(lambda obs: 0.0, EpisodeSetup(one, 5.0, 100.0, 0.0, 20.0), CFG)
    off = LeaderTrajectory.from_speeds(np.full(10, 5.0), 0.1)
    with pytest.raises(ValueError):
        rollout(lambda obs: 0.0, EpisodeSetup(off, 5.0, 100.0, 0.0, 20.0), CFG)


def test_rollout_clamps_and_masks():
    lead = LeaderTrajectory.from_speeds(np.full(50, 10.0), CFG.dt)
    tr = rollout(lambda obs: 99.0, EpisodeSetup(lead, 10.0, 500.0, 0.0, 30.0), CFG)
    assert len(tr) == 49
    assert tr.action.max() <= CFG.a_max and tr.action.min() >= CFG.a_min
    assert tr.jerk[0] == pytest.approx(CFG.a_max / CFG.dt)
    assert not tr.collision and not tr.red_violation


def _pair(pid, dt=CFG.dt, n=100):
    lead = LeaderTrajectory.from_speeds(np.full(n, 8.0), dt, p0=30.0, source="real")
    fol = LeaderTrajectory.from_speeds(np.full(n, 8.0), dt, p0=0.0, source="real")
    return CfPair(pid, lead, fol, signal_offset=0.0)


def test_benchmark_bundle_records_failures(tmp_path):
    bad = CfPair("bad", LeaderTrajectory.from_speeds(np.array([8.0]), CFG.dt, p0=30.0, source="real"),
                 LeaderTrajectory.from_speeds(np.array([8.0]), CFG.dt, source="real"))
    b = run_benchmark_suite(lambda obs: 0.0, [_pair("a"), bad], CFG, out_dir=tmp_path, suites=("ecdf", "critical"))
    assert [f[0] for f in b.failures][:1] == ["bad"]
    names = {p.name for p in tmp_path.iterdir()}
    assert {"summary.csv", "failures.csv", "ecdf_ttc.csv", "ecdf_gap.csv", "ecdf_jerk.csv", "traces"} <= names
    assert (tmp_path / "traces" / "a.csv").exists()
    assert (tmp_path / "traces" / "critical_brake.csv").exists()
    rows = (tmp_path / "summary.csv").read_text().splitlines()
    assert rows[0].startswith("suite,population,episodes,failures")
    agent = [r for r in rows if r.startswith("ecdf,agent")][0].split(",")
    assert agent[2] == "2" and agent[3] == "1"


def test_benchmark_is_deterministic(tmp_path):
    for k in range(2):
        run_benchmark_suite(lambda obs: -0.5, [_pair("a")], CFG, out_dir=tmp_path / str(k), suites=("ecdf", "critical"))
    for name in ("summary.csv", "ecdf_gap.csv", "traces/critical_brake.csv"):
        assert (tmp_path / "0" / name).read_bytes() == (tmp_path / "1" / name).read_bytes()


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_benchmark_suite(lambda obs: 0.0, [], CFG, suites=("nope",))


def test_metric_samples_extend():
    m = MetricSamples.empty()
    m.extend(MetricSamples(np.array([1.0]), np.array([2.0]), np.array([3.0]), 1))
    assert m.collisions == 1 and m.gap.tolist() == [2.0]
