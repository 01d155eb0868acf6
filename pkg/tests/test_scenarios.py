import math

import numpy as np
from hypothesis import given, settings, strategies as st

from sigdrl.config import SimConfig
from sigdrl.leaders import OuParams, gen_ou_trajectory
from sigdrl.scenarios import FREE_SPEED_FACTOR, SIGNAL_LEAD_TIME, pool_factory, sample_setup
from sigdrl.sim import d_safe, ssd

CFG = SimConfig()
LEADER = gen_ou_trajectory(4.0, OuParams.from_config(CFG, seed=3), 9.0)


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1))
def test_ordinary_start_is_safe_and_legal(seed):
    s = sample_setup(LEADER, CFG, np.random.default_rng(seed))
    vl = float(LEADER.speed[0])
    assert 0.0 <= s.v0 <= CFG.v_limit
    assert s.gap0 >= d_safe(s.v0, vl, CFG)
    assert 20.0 <= s.d_tl0 <= CFG.d_entry
    assert 0.0 <= s.t0 <= CFG.schedule.cycle


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1))
def test_free_start_has_no_leader_and_may_speed(seed):
    s = sample_setup(LEADER, CFG, np.random.default_rng(seed), p_free=1.0)
    assert math.isinf(s.gap0)
    assert 0.0 <= s.v0 <= FREE_SPEED_FACTOR * CFG.v_limit


@settings(max_examples=50)
@given(st.integers(0, 2**31 - 1))
def test_signal_start_precedes_a_phase_change(seed):
    s = sample_setup(LEADER, CFG, np.random.default_rng(seed), p_signal=1.0)
    sched = CFG.schedule
    leads = (sched.green_end - s.t0, sched.amber_end - s.t0)
    assert any(-1e-9 <= x <= SIGNAL_LEAD_TIME + CFG.dt for x in leads)
    assert 2.0 <= s.d_tl0 <= ssd(s.v0, CFG) + s.v0 * SIGNAL_LEAD_TIME + 20.0
    assert s.gap0 > s.d_tl0


def test_free_share_roughly_matches():
    make = pool_factory([LEADER], CFG, p_free=0.4)
    rng = np.random.default_rng(0)
    free = np.mean([math.isinf(make(rng).gap0) for _ in range(2000)])
    assert abs(free - 0.4) < 0.04
    # some free starts exceed the limit so the speed penalty is seen in training
    fast = [s.v0 for s in (make(rng) for _ in range(500)) if s.v0 > CFG.v_limit]
    assert fast


def test_defaults_consume_the_same_stream():
    a = sample_setup(LEADER, CFG, np.random.default_rng(5))
    b = sample_setup(LEADER, CFG, np.random.default_rng(5), p_free=0.0, p_signal=0.0)
    assert (a.v0, a.gap0, a.d_tl0, a.t0) == (b.v0, b.gap0, b.d_tl0, b.t0)
