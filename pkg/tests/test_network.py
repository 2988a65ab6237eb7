import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relupath.network import (
    CanonicalNet,
    DimensionMismatchError,
    DomainError,
    GeneralReLUNet,
    InputPoint,
    OutputActivation,
    canonicalize,
    clip,
    evaluate,
    general_from_layers,
    shift_output,
)

from conftest import random_general_net, random_inputs


def test_linear_net_splits_signs():
    net = general_from_layers(2, [([[3.0, -2.0]], [0.0])])
    can = canonicalize(net)
    # input level is [x1, x2, 1, -x1, -x2, -1]
    np.testing.assert_array_equal(can.weights[0], [[3.0, 0.0, 0.0, 0.0, 2.0, 0.0]])
    assert evaluate(can, [0.5, -0.5]) == 2.5
    assert evaluate(net, [0.5, -0.5]) == 2.5


def test_offset_routes_through_locked_input():
    net = general_from_layers(1, [([[1.0]], [0.7]), ([[1.0]], [0.0])])
    can = canonicalize(net)
    # hidden row for the unit: weight 1 on x, 0.7 on the locked +1 coordinate
    np.testing.assert_array_equal(can.weights[0][0], [1.0, 0.7, 0.0, 0.0])
    assert evaluate(can, [-0.5]) == pytest.approx(0.2, abs=1e-15)


def test_negative_offset_uses_minus_lock():
    net = general_from_layers(1, [([[1.0]], [-0.3]), ([[1.0]], [0.0])])
    can = canonicalize(net)
    np.testing.assert_array_equal(can.weights[0][0], [1.0, 0.0, 0.0, 0.3])
    assert evaluate(can, [0.5]) == pytest.approx(0.2, abs=1e-15)


def test_canonical_widths(rng):
    net = random_general_net(rng, 3, 3, widths=[4, 4])
    can = canonicalize(net)
    assert can.layer_widths == (10, 10, 8)
    assert can.weights[0].shape == (10, 8)
    assert all((w >= 0).all() for w in can.weights)


def test_random_canonicalization_matches(rng):
    net = random_general_net(rng, 3, 3, widths=[4, 4])
    X = random_inputs(rng, 100, 3)
    a, b = evaluate(net, X), evaluate(canonicalize(net), X)
    assert np.max(np.abs(a - b) / (1 + np.abs(a))) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), L=st.integers(1, 5), d=st.integers(1, 6))
def test_canonicalization_preserves_function(seed, L, d):
    rng = np.random.default_rng(seed)
    net = random_general_net(rng, L, d)
    X = random_inputs(rng, 100, d)
    a, b = evaluate(net, X), evaluate(canonicalize(net), X)
    assert np.all(np.abs(a - b) <= 1e-10 * (1 + np.abs(a)))


def test_duplicate_pair_negation(rng):
    # a signed-duplicate pair contributes relu(s) - relu(-s) = s, so negating
    # the incoming signal negates the contribution exactly
    w = rng.normal(size=(1, 4))
    can = canonicalize(general_from_layers(4, [(w, [0.0])]))
    X = random_inputs(rng, 50, 4)
    np.testing.assert_array_equal(evaluate(can, -X), -evaluate(can, X))
    s = rng.normal(size=100)
    np.testing.assert_array_equal(np.maximum(-s, 0) - np.maximum(s, 0), -(np.maximum(s, 0) - np.maximum(-s, 0)))


def test_hand_evaluation(v8_net):
    assert evaluate(v8_net, [1.0, 1.0]) == 8.0
    assert evaluate(canonicalize(v8_net), InputPoint(np.array([1.0, 1.0]))) == 8.0


def test_zero_net():
    net = general_from_layers(3, [(np.zeros((4, 3)), np.zeros(4)), (np.zeros((1, 4)), [0.0])])
    assert evaluate(net, [0.3, -0.2, 1.0]) == 0.0
    assert evaluate(canonicalize(net), [0.3, -0.2, 1.0]) == 0.0


def test_clip_output(v8_net):
    clipped = GeneralReLUNet(v8_net.d, v8_net.weights, v8_net.offsets, OutputActivation.clipped(1.0))
    assert evaluate(clipped, [1.0, 1.0]) == 1.0
    assert evaluate(canonicalize(clipped), [1.0, 1.0]) == 1.0


def test_clip_lipschitz(rng):
    a, b = rng.normal(scale=3, size=1000), rng.normal(scale=3, size=1000)
    assert np.all(np.abs(clip(a, 1.0) - clip(b, 1.0)) <= np.abs(a - b))
    assert clip(0.0, 1.0) == 0.0


def test_output_activation_validation():
    with pytest.raises(ValueError):
        OutputActivation("clip", 0.0)
    with pytest.raises(ValueError):
        OutputActivation("tanh")
    with pytest.raises(ValueError):
        OutputActivation("linear", 1.0)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        general_from_layers(2, [(np.ones((3, 2)), np.zeros(3)), (np.ones((1, 4)), [0.0])])
    with pytest.raises(DimensionMismatchError):
        general_from_layers(2, [(np.ones((2, 2)), np.zeros(2))])
    with pytest.raises(DimensionMismatchError):
        evaluate(general_from_layers(2, [(np.ones((1, 2)), np.zeros(1))]), np.ones((3, 3)) * 0.5)


def test_input_domain():
    with pytest.raises(DomainError):
        InputPoint(np.array([1.5, 0.0]))
    with pytest.raises(DomainError):
        evaluate(general_from_layers(1, [([[1.0]], [0.0])]), [2.0])


def test_canonical_invariants_enforced():
    with pytest.raises(ValueError):
        CanonicalNet(1, [np.array([[-1.0, 0, 0, 0]])])
    # duplicate half differs
    w = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0.5, 0, 0, 0], [0, 1.0, 0, 0]])
    with pytest.raises(ValueError):
        CanonicalNet(1, [w, np.ones((1, 4))])


def test_shift_output(rng):
    can = canonicalize(random_general_net(rng, 2, 2))
    X = random_inputs(rng, 20, 2)
    np.testing.assert_allclose(evaluate(shift_output(can, 1.0), X), evaluate(can, X) + 1.0, atol=1e-12)
    np.testing.assert_allclose(evaluate(shift_output(can, -0.5), X), evaluate(can, X) - 0.5, atol=1e-12)


def test_networks_are_immutable(v8_net):
    with pytest.raises(ValueError):
        v8_net.weights[0][0, 0] = 5.0
