import numpy as np
import pytest
from hypothesis import given, strategies as st

import gradcheck
from sigdrl import nn


def test_spec_validation():
    with pytest.raises(ValueError):
        nn.MlpSpec((3,))
    with pytest.raises(ValueError):
        nn.MlpSpec((3, 0, 1))
    with pytest.raises(ValueError):
        nn.MlpSpec((3, 1), output_activation="bounded")
    with pytest.raises(ValueError):
        nn.MlpSpec((3, 1), hidden_activation="gelu")
    assert nn.MlpSpec.from_dict(nn.spec_dict(nn.mlp(7, [30], 1, bounds=(-4, 2)))) == nn.mlp(7, [30], 1, bounds=(-4, 2))


def test_identity_and_zero_nets():
    spec = nn.MlpSpec((3, 3))
    ident = [np.eye(3), np.zeros(3)]
    x = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(nn.forward(spec, ident, x), x)
    zero = [np.zeros((3, 3)), np.zeros(3)]
    assert np.array_equal(nn.forward(spec, zero, x), np.zeros(3))


def test_forward_shape_mismatch():
    spec = nn.mlp(4, [5], 1)
    params = nn.init_params(spec, np.random.default_rng(0))
    with pytest.raises(ValueError):
        nn.forward(spec, params, np.zeros(3))


def test_forward_reproducible():
    spec = nn.mlp(7, [30, 30, 30], 1)
    a = nn.init_params(spec, np.random.default_rng(1))
    b = nn.init_params(spec, np.random.default_rng(1))
    x = np.random.default_rng(2).normal(size=(5, 7))
    assert np.array_equal(nn.forward(spec, a, x), nn.forward(spec, b, x))


def test_single_linear_layer_gradient():
    spec = nn.MlpSpec((1, 1))
    grads, dx = nn.gradients(spec, [np.array([[3.0]]), np.array([0.0])], np.array([2.5]), np.array([1.0]))
    assert grads[0][0, 0] == 2.5 and grads[1][0] == 1.0 and dx[0] == 3.0


def test_zero_upstream_zero_gradients():
    spec = nn.mlp(7, [30, 30], 2)
    params = nn.init_params(spec, np.random.default_rng(0))
    grads, dx = nn.gradients(spec, params, np.ones((3, 7)), np.zeros((3, 2)))
    assert all(not g.any() for g in grads) and not dx.any()


@given(st.integers(0, 2**31 - 1))
def test_bounded_output_respects_bounds(seed):
    rng = np.random.default_rng(seed)
    spec = nn.mlp(7, [30], 1, bounds=(-4.0, 2.0))
    params = nn.init_params(spec, rng, out_scale=10.0)
    y = nn.forward(spec, params, rng.normal(0, 100, size=(64, 7)))
    assert y.min() >= -4.0 and y.max() <= 2.0


@pytest.mark.parametrize(
    "spec",
    [nn.mlp(7, [30] * 3, 1, bounds=(-4, 2)), nn.mlp(8, [30] * 3, 1), nn.mlp(7, [128] * 5, 2), nn.mlp(8, [128] * 5, 1),
     nn.MlpSpec((4, 6, 3), hidden_activation="tanh")],
    ids=["ddpg-actor", "ddpg-critic", "sac-actor", "sac-critic", "tanh"],
)
def test_gradients_match_finite_differences(spec):
    rng = np.random.default_rng(7)
    for _ in range(5):
        assert gradcheck.check(spec, rng) < 1e-4


def test_soft_update_examples():
    t, o = [np.zeros(3)], [np.ones(3)]
    nn.soft_update(t, o, 0.001)
    assert np.allclose(t[0], 0.001)
    nn.soft_update(t, o, 1.0)
    assert np.array_equal(t[0], o[0])
    before = t[0].copy()
    nn.soft_update(t, [np.full(3, 5.0)], 0.0)
    assert np.array_equal(t[0], before)
    with pytest.raises(ValueError):
        nn.soft_update(t, o, 1.5)


def test_adam_zero_gradient_and_zero_lr():
    p = [np.array([1.0, 2.0])]
    st_ = nn.AdamState.for_params(p, 0.1)
    nn.adam_update(st_, p, [np.zeros(2)])
    assert np.array_equal(p[0], [1.0, 2.0]) and st_.step == 1
    st0 = nn.AdamState.for_params(p, 0.0)
    nn.adam_update(st0, p, [np.ones(2)])
    assert np.array_equal(p[0], [1.0, 2.0])


def test_adam_constant_gradient_step_approaches_lr():
    p = [np.zeros(2)]
    st_ = nn.AdamState.for_params(p, 0.01)
    prev = p[0].copy()
    for _ in range(2000):
        nn.adam_update(st_, p, [np.array([3.0, -0.5])])
        step = p[0] - prev
        prev = p[0].copy()
    assert np.allclose(np.abs(step), 0.01, rtol=1e-3)
    assert step[0] < 0 < step[1]


def test_adam_rejects_non_finite():
    p = [np.zeros(2)]
    with pytest.raises(FloatingPointError):
        nn.adam_update(nn.AdamState.for_params(p, 0.1), p, [np.array([np.nan, 0.0])])


def test_checkpoint_round_trip_bit_identical(tmp_path):
    spec = nn.mlp(7, [30, 30], 1, bounds=(-4, 2))
    params = nn.init_params(spec, np.random.default_rng(0), np.float32)
    opt = nn.AdamState.for_params(params, 0.001)
    nn.adam_update(opt, params, [np.ones_like(p) for p in params])
    arrays = {**nn.param_arrays("actor", params), **nn.adam_arrays("opt", opt)}
    meta = {"spec": nn.spec_dict(spec), "opt": nn.adam_meta(opt)}
    path = tmp_path / "ck.zip"
    nn.save_checkpoint(path, meta, arrays)
    meta2, arrays2 = nn.load_checkpoint(path)
    p2 = nn.params_from("actor", arrays2, len(params))
    spec2 = nn.MlpSpec.from_dict(meta2["spec"])
    x = np.random.default_rng(1).normal(size=(9, 7)).astype(np.float32)
    assert np.array_equal(nn.forward(spec, params, x), nn.forward(spec2, p2, x))
    opt2 = nn.adam_from("opt", meta2["opt"], arrays2)
    assert opt2.step == 1 and all(np.array_equal(a, b) for a, b in zip(opt.m, opt2.m))
    # identical content gives identical bytes
    nn.save_checkpoint(tmp_path / "ck2.zip", meta, arrays)
    assert (tmp_path / "ck2.zip").read_bytes() == path.read_bytes()


def test_load_checkpoint_rejects_foreign_zip(tmp_path):
    import zipfile

    path = tmp_path / "x.zip"
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("meta.json", '{"format": "other"}')
    with pytest.raises(ValueError):
        nn.load_checkpoint(path)
