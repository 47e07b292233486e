import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stare.nn import (
    AdamState,
    CheckpointError,
    ShapeError,
    Tensor,
    adam_step,
    add,
    add_bias,
    concat,
    contract,
    cross_entropy,
    dropout,
    embedding,
    gather_rows,
    gelu,
    gradcheck,
    layer_norm,
    load_checkpoint,
    lstm,
    matmul,
    reshape,
    save_checkpoint,
    scale,
    select,
    softmax,
    transpose,
)

TOL = 1e-4
SHAPE = (3, 4, 5)


def _rand(rng, *shape, s=1.0):
    return Tensor(rng.normal(0, s, size=shape))


def _check(build, inputs, rng):
    """Gradcheck ``sum(build(*inputs) * R)`` for a fixed random R."""
    out_shape = build(*inputs).shape
    w = rng.normal(size=out_shape)
    return gradcheck(lambda: contract(build(*inputs), w), inputs)


# -- gradient checks on 3x4x5 inputs -----------------------------------------

@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_grad_add(rng):
    assert _check(add, [_rand(rng, *SHAPE), _rand(rng, *SHAPE)], rng) <= TOL


def test_grad_add_bias(rng):
    assert _check(add_bias, [_rand(rng, *SHAPE), _rand(rng, 5)], rng) <= TOL


def test_grad_scale(rng):
    assert _check(lambda x: scale(x, -0.37), [_rand(rng, *SHAPE)], rng) <= TOL


def test_grad_matmul_shared_weight(rng):
    assert _check(matmul, [_rand(rng, *SHAPE), _rand(rng, 5, 6)], rng) <= TOL


def test_grad_matmul_batched(rng):
    assert _check(matmul, [_rand(rng, *SHAPE), _rand(rng, 3, 5, 4)], rng) <= TOL


def test_grad_reshape_transpose(rng):
    build = lambda x: transpose(reshape(x, (3, 20)), (1, 0))  # noqa: E731
    assert _check(build, [_rand(rng, *SHAPE)], rng) <= TOL


def test_grad_select_and_gather(rng):
    assert _check(lambda x: select(x, 0, 1), [_rand(rng, *SHAPE)], rng) <= TOL
    assert _check(lambda x: gather_rows(x, np.array([0, 2, 2, 1])), [_rand(rng, 3, 5)], rng) <= TOL


def test_grad_concat(rng):
    build = lambda a, b: concat([a, b], axis=-1)  # noqa: E731
    assert _check(build, [_rand(rng, *SHAPE), _rand(rng, 3, 4, 2)], rng) <= TOL


def test_grad_gelu(rng):
    assert _check(gelu, [_rand(rng, *SHAPE, s=2.0)], rng) <= TOL


def test_grad_softmax(rng):
    assert _check(lambda x: softmax(x, axis=-1), [_rand(rng, *SHAPE)], rng) <= TOL
    assert _check(lambda x: softmax(x, axis=1), [_rand(rng, *SHAPE)], rng) <= TOL


def test_grad_softmax_masked(rng):
    mask = np.zeros((3, 1, 5))
    mask[:, :, 3:] = -np.inf
    assert _check(lambda x: softmax(x, -1, mask), [_rand(rng, *SHAPE)], rng) <= TOL


def test_grad_layer_norm(rng):
    inputs = [_rand(rng, *SHAPE), Tensor(1 + 0.1 * rng.normal(size=5)), _rand(rng, 5)]
    assert _check(layer_norm, inputs, rng) <= TOL


def test_grad_embedding(rng):
    ids = rng.integers(0, 7, size=(3, 4))
    assert _check(lambda t: embedding(t, ids), [_rand(rng, 7, 5)], rng) <= TOL


def test_grad_cross_entropy(rng):
    logits = _rand(rng, 12, 5)
    targets = rng.integers(0, 5, size=12)
    targets[[1, 7]] = -100
    assert gradcheck(lambda: cross_entropy(logits, targets), [logits]) <= TOL


def test_grad_dropout_fixed_mask(rng):
    x = _rand(rng, *SHAPE)
    assert _check(lambda t: dropout(t, 0.3, np.random.default_rng(5)), [x], rng) <= TOL


@pytest.mark.parametrize("reverse", [False, True])
def test_grad_lstm(rng, reverse):
    B, T, D, H = 3, 4, 5, 3
    valid = np.ones((B, T), dtype=bool)
    valid[1, 3:] = False
    valid[2, 2:] = False
    inputs = [_rand(rng, B, T, D), _rand(rng, D, 4 * H, s=0.5), _rand(rng, H, 4 * H, s=0.5), _rand(rng, 4 * H, s=0.5)]
    build = lambda x, w, u, b: lstm(x, valid, w, u, b, reverse=reverse)  # noqa: E731
    assert _check(build, inputs, rng) <= TOL


# -- forward examples ---------------------------------------------------------

def test_softmax_uniform():
    y = softmax(Tensor(np.zeros(3))).data
    assert np.allclose(y, 1 / 3, atol=1e-15)


def test_softmax_masked_exact_zero():
    mask = np.array([0.0, 0.0, -np.inf, -np.inf])
    y = softmax(Tensor(np.array([1.0, 2.0, 50.0, -3.0])), additive_mask=mask).data
    assert y[2] == 0.0 and y[3] == 0.0
    assert abs(y.sum() - 1) <= 1e-12


def test_softmax_fully_masked_row_errors():
    with pytest.raises(ValueError):
        softmax(Tensor(np.zeros(2)), additive_mask=np.full(2, -np.inf))


def test_cross_entropy_confident_is_zero():
    logits = np.zeros((4, 6))
    t = np.array([0, 3, 5, 2])
    logits[np.arange(4), t] = 1e6
    assert cross_entropy(Tensor(logits), t).item() == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_uniform_is_log_c():
    assert cross_entropy(Tensor(np.zeros((3, 7))), np.array([1, 2, 3])).item() == pytest.approx(math.log(7))


def test_cross_entropy_ignored_rows_have_zero_grad(rng):
    x = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    t = np.array([1, -100, 2, -100, 0])
    cross_entropy(x, t).backward()
    assert np.all(x.grad[[1, 3]] == 0.0)
    # value equals mean over the kept rows only
    kept = cross_entropy(Tensor(x.data[[0, 2, 4]]), t[[0, 2, 4]]).item()
    assert cross_entropy(Tensor(x.data), t).item() == pytest.approx(kept, rel=1e-14)


def test_cross_entropy_all_ignored():
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    loss = cross_entropy(x, np.array([-100, -100]))
    loss.backward()
    assert loss.item() == 0.0 and (x.grad is None or not x.grad.any())


def test_gelu_values():
    y = gelu(Tensor(np.array([0.0, 1.0, -1.0]))).data
    assert y[0] == 0.0
    assert y[1] == pytest.approx(0.8413447460685429, abs=1e-12)
    assert y[2] == pytest.approx(-0.15865525393145707, abs=1e-12)


def test_shape_errors_name_both_shapes():
    with pytest.raises(ShapeError) as ei:
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))
    assert "(2, 3)" in str(ei.value) and "(4, 5)" in str(ei.value)
    with pytest.raises(ShapeError):
        add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))
    with pytest.raises(ShapeError):
        add_bias(Tensor(np.zeros((2, 3))), Tensor(np.zeros(2)))


def test_layer_norm_rejects_bad_eps():
    with pytest.raises(ValueError):
        layer_norm(Tensor(np.zeros((1, 3))), Tensor(np.ones(3)), Tensor(np.zeros(3)), eps=0.0)


def test_embedding_rejects_out_of_range():
    with pytest.raises(IndexError):
        embedding(Tensor(np.zeros((3, 2))), np.array([0, 3]))


def test_gradient_accumulates_across_uses(rng):
    x = Tensor(rng.normal(size=4), requires_grad=True)
    contract(add(x, x), np.ones(4)).backward()
    assert np.allclose(x.grad, 2.0)


def test_lstm_zero_weights_state_stays_zero(rng):
    x = Tensor(rng.normal(size=(2, 3, 4)))
    z = Tensor(np.zeros((4, 8)))
    out = lstm(x, np.ones((2, 3), bool), z, Tensor(np.zeros((2, 8))), Tensor(np.zeros(8))).data
    # zero pre-activations: g = tanh(0) = 0 so the cell never charges
    assert np.all(out == 0.0)


def test_lstm_single_step_matches_cell_equations(rng):
    D, H = 3, 2
    x = rng.normal(size=(1, 1, D))
    w, u, b = rng.normal(size=(D, 4 * H)), rng.normal(size=(H, 4 * H)), rng.normal(size=4 * H)
    out = lstm(Tensor(x), np.ones((1, 1), bool), Tensor(w), Tensor(u), Tensor(b)).data[0, 0]
    z = x[0, 0] @ w + b
    sig = lambda v: 1 / (1 + np.exp(-v))  # noqa: E731
    i, _, g, o = sig(z[:H]), sig(z[H:2 * H]), np.tanh(z[2 * H:3 * H]), sig(z[3 * H:])
    c = i * g
    assert np.allclose(out, o * np.tanh(c), atol=1e-14)


def test_lstm_padding_carries_state(rng):
    D, H = 3, 2
    params = [Tensor(rng.normal(size=s)) for s in [(D, 4 * H), (H, 4 * H), (4 * H,)]]
    x = rng.normal(size=(1, 5, D))
    valid = np.array([[True, True, True, False, False]])
    out = lstm(Tensor(x), valid, *params).data
    short = lstm(Tensor(x[:, :3]), np.ones((1, 3), bool), *params).data
    assert np.array_equal(out[0, 4], short[0, 2])


# -- property suites ----------------------------------------------------------

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
rows = arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 9)), elements=finite)


@settings(max_examples=10_000, deadline=None)
@given(rows, st.floats(-100, 100))
def test_softmax_rows_sum_and_shift_invariance(x, c):
    y = softmax(Tensor(x)).data
    assert np.all(np.abs(y.sum(axis=-1) - 1) <= 1e-12)
    assert np.all(y >= 0)
    assert np.allclose(softmax(Tensor(x + c)).data, y, rtol=0, atol=1e-12)


ln_rows = arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 9)),
                 elements=st.floats(-1e3, 1e3, allow_nan=False))


@settings(max_examples=10_000, deadline=None)
@given(ln_rows)
def test_layer_norm_standardizes(x):
    d = x.shape[-1]
    spread = x.std(axis=-1)
    x = x[spread > 0.1]  # eps/var must stay below the 1e-9 tolerance
    if not len(x):
        return
    y = layer_norm(Tensor(x), Tensor(np.ones(d)), Tensor(np.zeros(d)), eps=1e-12).data
    assert np.all(np.abs(y.mean(axis=-1)) <= 1e-12)
    assert np.all(np.abs(y.var(axis=-1) - 1) <= 1e-9)


# -- adam -----------------------------------------------------------------------

def test_adam_zero_grad_and_zero_lr_are_identity(rng):
    p = {"w": rng.normal(size=(3, 2))}
    before = p["w"].copy()
    adam_step(p, {"w": np.zeros((3, 2))}, AdamState(), lr=0.1)
    assert np.array_equal(p["w"], before)
    adam_step(p, {"w": rng.normal(size=(3, 2))}, AdamState(), lr=0.0)
    assert np.array_equal(p["w"], before)


def test_adam_matches_scalar_recurrence():
    g, lr, b1, b2, eps = 0.7, 0.01, 0.9, 0.999, 1e-8
    p = {"x": np.array([1.5])}
    st_ = AdamState()
    x, m, v = 1.5, 0.0, 0.0
    for t in range(1, 26):
        adam_step(p, {"x": np.array([g])}, st_, lr, b1, b2, eps)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
    assert p["x"][0] == pytest.approx(x, rel=1e-14)
    assert st_.step == 25


def test_adam_state_shape_mismatch():
    st_ = AdamState()
    adam_step({"w": np.zeros(3)}, {"w": np.ones(3)}, st_)
    with pytest.raises(ValueError):
        adam_step({"w": np.zeros(4)}, {"w": np.ones(4)}, st_)


# -- checkpoints ------------------------------------------------------------------

def test_checkpoint_roundtrip_bit_exact(tmp_path, rng):
    tensors = {"a": rng.normal(size=(3, 4)), "b.c": np.array([np.pi, -0.0, 1e-300]), "s": np.array(2.5)}
    save_checkpoint(tmp_path / "ck.npz", tensors, {"epoch": 3})
    back, meta = load_checkpoint(tmp_path / "ck.npz")
    assert meta == {"epoch": 3}
    for k, v in tensors.items():
        assert back[k].tobytes() == v.tobytes() and back[k].shape == v.shape


def test_checkpoint_rejects_foreign_file(tmp_path):
    np.savez(tmp_path / "x.npz", a=np.zeros(2))
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "x.npz")
