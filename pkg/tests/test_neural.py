import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aemor.errors import ContractError
from aemor.linalg import make_rng
from aemor.neural import (Activation, MLPParams, Network, NetworkSpec, activation_apply, activation_grad, backward,
                          forward, mse)
from gradcheck import fd_errors


def gelu_scalar(x):
    return x * 0.5 * (1 + math.erf(x / math.sqrt(2)))


def silu_scalar(x):
    return x / (1 + math.exp(-x))


@pytest.mark.parametrize("x", [-3.0, -0.5, 0.0, 0.7, 2.5])
def test_activation_values_against_scalar_formulas(x):
    assert activation_apply("gelu", x) == pytest.approx(gelu_scalar(x), rel=1e-14, abs=1e-16)
    assert activation_apply("silu", x) == pytest.approx(silu_scalar(x), rel=1e-14, abs=1e-16)
    assert activation_apply("relu", x) == max(x, 0.0)
    assert activation_apply("identity", x) == x


def test_known_activation_values():
    # GELU(1) = Phi(1) = 0.8413447460685429
    assert activation_apply("gelu", 1.0) == pytest.approx(0.8413447460685429, rel=1e-14)
    assert activation_apply("silu", 0.0) == 0.0


@pytest.mark.parametrize("kind", ["identity", "gelu", "silu", "relu"])
def test_activation_derivatives_match_finite_differences(kind):
    x = np.array([-2.3, -0.4, 0.3, 1.7])
    h = 1e-6
    fd = (activation_apply(kind, x + h) - activation_apply(kind, x - h)) / (2 * h)
    np.testing.assert_allclose(activation_grad(kind, x), fd, rtol=1e-8, atol=1e-9)


def test_relu_gradient_at_zero_is_zero():
    assert activation_grad("relu", 0.0) == 0.0


def test_unknown_activation():
    with pytest.raises(ContractError):
        Activation.parse("tanh")


def test_spec_validation():
    with pytest.raises(ContractError):
        NetworkSpec((3,), ())
    with pytest.raises(ContractError):
        NetworkSpec((3, 0, 2), ("gelu", "identity"))
    with pytest.raises(ContractError):
        NetworkSpec((3, 4, 2), ("gelu",))


def test_spec_roundtrip_and_describe():
    spec = NetworkSpec.build((4, 16, 2), "silu")
    assert NetworkSpec.from_dict(spec.to_dict()) == spec
    assert spec.describe() == "4 -SILU-> 16 --> 2"


def test_glorot_bounds_and_zero_bias():
    spec = NetworkSpec.build((30, 20, 10))
    p = MLPParams.glorot(spec, make_rng(0))
    for w in p.weights:
        limit = math.sqrt(6 / sum(w.shape))
        assert np.all(np.abs(w) <= limit)
    assert all(np.all(b == 0) for b in p.biases)


def test_forward_single_layer_by_hand():
    spec = NetworkSpec((2, 2), ("relu",))
    p = MLPParams([np.array([[1.0, -1.0], [2.0, 0.5]])], [np.array([0.0, -1.0])])
    out, _ = forward(spec, p, np.array([1.0, 3.0]))
    np.testing.assert_allclose(out, [0.0, 2.5])


def test_batch_equals_per_sample_loop():
    spec = NetworkSpec((5, 7, 6, 3), ("gelu", "silu", "identity"))
    net = Network.init(spec, make_rng(1))
    x = make_rng(2).standard_normal((4, 5))
    batched = net(x)
    for i in range(4):
        np.testing.assert_allclose(batched[i], net(x[i]), rtol=0, atol=1e-15)


def test_width_mismatch_is_named():
    net = Network.init(NetworkSpec.build((5, 3)), make_rng(0))
    with pytest.raises(ContractError, match="input width 4"):
        net(np.ones(4))


@pytest.mark.parametrize("acts", [("gelu", "silu", "identity"), ("relu", "relu", "identity"),
                                  ("identity", "gelu", "silu")])
def test_backward_matches_finite_differences(acts):
    spec = NetworkSpec((4, 6, 5, 3), acts)
    rng = make_rng(5)
    params = MLPParams.glorot(spec, rng)
    for b in params.biases:
        b[:] = rng.uniform(-0.1, 0.1, b.shape)
    x = rng.standard_normal((3, 4))
    target = rng.standard_normal((3, 3))

    def objective(ps):
        out, tape = forward(spec, ps[0], x)
        r = out - target
        g, _ = backward(spec, ps[0], tape, 2 * r / r.size)
        return float(np.mean(r * r)), [g]

    assert fd_errors(objective, [params]) < 1e-6


def test_input_gradient():
    spec = NetworkSpec((3, 4, 2), ("silu", "identity"))
    net = Network.init(spec, make_rng(3))
    x = np.array([0.2, -0.7, 1.1])
    _, tape = forward(spec, net.params, x)
    _, gx = backward(spec, net.params, tape, np.array([1.0, 0.0]))
    h = 1e-6
    fd = [(net(x + h * e)[0] - net(x - h * e)[0]) / (2 * h) for e in np.eye(3)]
    np.testing.assert_allclose(gx, fd, rtol=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_forward_is_deterministic(seed):
    net = Network.init(NetworkSpec.build((3, 8, 2)), make_rng(seed))
    x = make_rng(seed + 1).standard_normal((2, 3))
    assert np.array_equal(net(x), net(x.copy()))


def test_mse():
    assert mse([1.0, 2.0], [1.0, 4.0]) == 2.0
    with pytest.raises(ContractError):
        mse([1.0], [1.0, 2.0])
