import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from penn.autodiff import Tape, Tensor, backward
from penn.errors import DimensionError, ParameterError, PolicyError
from penn.objectives import LossKind, PredictionPolicy, apply_policy, loss, mape, mare

from oracles import central_diff, np_loss, rel_error

KINDS = [k.value for k in LossKind]

targets = arrays(np.float64, st.integers(1, 30), elements=st.floats(0.01, 1e4))


def _value(kind, y, y_hat):
    return loss(kind, y, Tensor(np.asarray(y_hat, dtype=np.float64))).item()


@pytest.mark.parametrize("kind", KINDS)
def test_perfect_prediction_is_zero(kind):
    y = np.array([3.0, -2.0, 7.5])
    assert _value(kind, y, y) == 0.0


def test_hand_examples():
    assert _value("mse", [2.0], [1.0]) == 1.0
    assert _value("mae", [2.0], [1.0]) == 1.0
    assert _value("mare", [2.0], [1.0]) == 0.5
    assert _value("mare", [1.0, 100.0], [1.1, 90.0]) == pytest.approx(0.1, abs=1e-15)
    assert _value("mae", [1.0, 100.0], [1.1, 90.0]) == pytest.approx(5.05, abs=1e-12)


def test_mape_examples():
    assert mape([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mape([2.0], [1.0]) == 50.0


def test_mare_rejects_zero_target_with_index():
    with pytest.raises(PolicyError, match="index 2"):
        _value("mare", [1.0, 2.0, 0.0], [1.0, 2.0, 3.0])
    with pytest.raises(PolicyError):
        mape([1.0, 0.0], [1.0, 1.0])


def test_unknown_kind_and_bad_shapes():
    with pytest.raises(ValueError):
        loss("huber", [1.0], Tensor([1.0]))
    with pytest.raises(DimensionError):
        mape([1.0, 2.0], [1.0])
    with pytest.raises(DimensionError):
        mape([], [])


def test_policy_examples():
    np.testing.assert_array_equal(apply_policy("thrust", np.array([-50.0, 120.0])), [0.0, 120.0])
    np.testing.assert_array_equal(apply_policy("impulse", np.array([-3.0])), [-3.0])
    np.testing.assert_array_equal(
        apply_policy("thrust", np.array([-50.0]), PredictionPolicy(clamp_negative_thrust=False)), [-50.0]
    )
    with pytest.raises(ParameterError):
        apply_policy("drag", np.array([1.0]))


@settings(max_examples=100)
@given(y=targets, noise=st.floats(-0.9, 0.9), c=st.sampled_from([1e-3, 1.0, 1e3]))
def test_scale_behaviour(y, noise, c):
    y_hat = y * (1 + noise * np.cos(np.arange(y.size)))
    base = {k: _value(k, y, y_hat) for k in KINDS}
    scaled = {k: _value(k, c * y, c * y_hat) for k in KINDS}
    assert abs(scaled["mare"] - base["mare"]) <= 1e-12
    assert scaled["mae"] == pytest.approx(c * base["mae"], rel=1e-12, abs=1e-300)
    assert scaled["mse"] == pytest.approx(c * c * base["mse"], rel=1e-12, abs=1e-300)
    assert mape(c * y, c * y_hat) == pytest.approx(100 * mare(y, y_hat), rel=1e-12, abs=1e-12)


@given(y=targets, y_hat=st.data())
def test_non_negative_and_zero_iff_exact(y, y_hat):
    pred = y_hat.draw(arrays(np.float64, y.size, elements=st.floats(-1e4, 1e4)))
    for kind in KINDS:
        value = _value(kind, y, pred)
        assert value >= 0
        assert (value == 0) == bool(np.array_equal(y, pred))


@given(y=targets, y_hat=st.data())
def test_mape_is_hundred_times_mare(y, y_hat):
    pred = y_hat.draw(arrays(np.float64, y.size, elements=st.floats(-1e4, 1e4)))
    assert mape(y, pred) == 100 * mare(y, pred)
    assert mare(y, pred) == pytest.approx(_value("mare", y, pred), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("seed", range(10))
def test_gradient_wrt_prediction(kind, seed):
    rng = np.random.default_rng(seed)
    y = rng.uniform(0.5, 50.0, size=7) * rng.choice([-1, 1], size=7)
    y_hat = y + rng.normal(0, 2.0, size=7)
    assert (np.abs(y - y_hat) > 1e-6).all()
    pred = Tensor(y_hat.copy(), requires_grad=True)
    with Tape() as tape:
        out = loss(kind, y, pred)
    backward(tape, out)
    numeric = central_diff(lambda: np_loss(kind, y, pred.data), [pred.data])[0]
    assert rel_error(pred.grad, numeric).max() < 1e-4


@pytest.mark.parametrize("kind", ["mae", "mare"])
def test_subgradient_at_zero_residual(kind):
    pred = Tensor([2.0, 3.0], requires_grad=True)
    with Tape() as tape:
        out = loss(kind, [2.0, 1.0], pred)
    backward(tape, out)
    assert pred.grad[0] == 0.0
    assert pred.grad[1] > 0
