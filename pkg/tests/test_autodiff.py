import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capsbench import autodiff as ad
from capsbench.autodiff import (ComputationRecord, NumericError, Parameter, Tensor, backward,
                                check_finite, check_model, corrupted_backward,
                                finite_diff_check)
from capsbench.baselines import LeNet

from oracles import conv2d_loop, finite_diff, out_extent, pool_loop


def rand(*shape, seed=0):
    return np.random.default_rng(seed).standard_normal(shape)


# ---------------------------------------------------------------- conv2d

def test_conv_table2_first_layer_shape():
    out = ad.conv2d(Tensor(np.zeros((90, 90, 1))), Tensor(np.zeros((7, 7, 1, 6))))
    assert out.shape == (84, 84, 6)


def test_conv_stem_shape_on_32x32():
    out = ad.conv2d(Tensor(np.zeros((32, 32, 1))), Tensor(np.zeros((9, 9, 1, 256))))
    assert out.shape == (24, 24, 256)


def test_conv_identity_kernel_on_constant_image():
    img = np.full((5, 7, 1), 0.3)
    out = ad.conv2d(Tensor(img), Tensor(np.ones((1, 1, 1, 1))))
    np.testing.assert_array_equal(out.data, img)


@pytest.mark.parametrize("stride", [1, 2, 3])
def test_conv_matches_loop_oracle(stride):
    x, k = rand(9, 8, 3), rand(3, 2, 3, 4, seed=1)
    out = ad.conv2d(Tensor(x), Tensor(k), stride=stride)
    np.testing.assert_allclose(out.data, conv2d_loop(x, k, stride), rtol=1e-12, atol=1e-12)


def test_conv_is_cross_correlation_not_convolution():
    x = np.zeros((3, 3, 1))
    x[0, 0, 0] = 1.0
    k = np.arange(4.0).reshape(2, 2, 1, 1)
    out = ad.conv2d(Tensor(x), Tensor(k))
    assert out.data[0, 0, 0] == k[0, 0, 0, 0]


def test_conv_same_padding_keeps_extent():
    out = ad.conv2d(Tensor(rand(2, 6, 5, 2)), Tensor(rand(3, 3, 2, 4)), padding="same")
    assert out.shape == (2, 6, 5, 4)


def test_conv_rejects_channel_mismatch():
    with pytest.raises(ValueError):
        ad.conv2d(Tensor(rand(5, 5, 2)), Tensor(rand(3, 3, 1, 1)))


def test_output_extents_exhaustive():
    # every valid (H, K, s) in 1..32
    for h in range(1, 33):
        x = Tensor(np.zeros((1, h, 1, 1)))
        for k in range(1, h + 1):
            kern = Tensor(np.zeros((k, 1, 1, 1)))
            for s in range(1, 33):
                expected = out_extent(h, k, s)
                assert ad.conv2d(x, kern, stride=s).shape[1] == expected
                assert ad.pool_avg(Tensor(np.zeros((1, h, k, 1))), k, s).shape[1] == expected


# ---------------------------------------------------------------- pooling

def test_pool_table2_shape():
    assert ad.pool_avg(Tensor(np.zeros((84, 84, 6))), 2, 2).shape == (42, 42, 6)


def test_pool_block_values():
    block = np.array([[1.0, 2.0], [3.0, 4.0]])[..., None]
    assert ad.pool_avg(Tensor(block), 2, 2).data.item() == 2.5
    assert ad.pool_max(Tensor(block), 2, 2).data.item() == 4.0


@pytest.mark.parametrize("pool", [ad.pool_avg, ad.pool_max])
def test_pool_constant_in_constant_out(pool):
    out = pool(Tensor(np.full((6, 6, 2), 1.7)), 2, 2)
    np.testing.assert_array_equal(out.data, np.full((3, 3, 2), 1.7))


def test_pools_match_loop_oracle():
    x = rand(7, 9, 2)
    np.testing.assert_allclose(ad.pool_avg(Tensor(x), 3, 2).data, pool_loop(x, 3, 2, np.mean), rtol=1e-13)
    np.testing.assert_array_equal(ad.pool_max(Tensor(x), 3, 2).data, pool_loop(x, 3, 2, np.max))


def test_max_pool_gradient_only_at_max():
    x = Parameter(np.array([[1.0, 5.0], [3.0, 2.0]])[..., None])
    backward(ad.reduce_sum(ad.pool_max(x, 2, 2)), [x])
    np.testing.assert_array_equal(x.grad[..., 0], [[0, 1], [0, 0]])
    num = finite_diff(lambda a: ad.pool_max(Tensor(a), 2, 2).data.sum(), x.data.copy())
    np.testing.assert_allclose(x.grad, num, atol=1e-9)


# ---------------------------------------------------------------- dense and activations

def test_fully_connected_table2_shape():
    out = ad.fully_connected(Tensor(np.zeros(1152)), Tensor(np.zeros((1152, 300))), Tensor(np.zeros(300)))
    assert out.shape == (300,)


def test_fully_connected_identity_and_bias():
    x = rand(5)
    out = ad.fully_connected(Tensor(x), Tensor(np.eye(5)), Tensor(np.zeros(5)))
    np.testing.assert_array_equal(out.data, x)
    b = rand(3, seed=2)
    out = ad.fully_connected(Tensor(x), Tensor(np.zeros((5, 3))), Tensor(b))
    np.testing.assert_array_equal(out.data, b)


def test_fully_connected_shape_error():
    with pytest.raises(ValueError):
        ad.fully_connected(Tensor(np.zeros(4)), Tensor(np.zeros((5, 3))))


def test_activation_values():
    np.testing.assert_array_equal(ad.activation(Tensor(np.array([-3.0, 2.0])), "relu").data, [0.0, 2.0])
    assert ad.activation(Tensor(np.array(0.0)), "sigmoid").item() == 0.5
    with pytest.raises(ValueError):
        ad.activation(Tensor(np.zeros(1)), "gelu")


def test_tanh_gradient_at_zero():
    x = Parameter(np.array([0.0]))
    backward(ad.reduce_sum(ad.tanh(x)), [x])
    assert x.grad[0] == 1.0
    assert abs(finite_diff(lambda a: np.tanh(a).sum(), np.zeros(1))[0] - 1.0) < 1e-9


def test_sigmoid_is_stable_for_large_inputs():
    with check_finite():
        out = ad.sigmoid(Tensor(np.array([-800.0, 800.0])))
    np.testing.assert_array_equal(out.data, [0.0, 1.0])


# ---------------------------------------------------------------- softmax

def test_softmax_examples():
    np.testing.assert_allclose(ad.softmax(Tensor(np.zeros(4))).data, [0.25] * 4, rtol=0, atol=1e-15)
    np.testing.assert_allclose(ad.softmax(Tensor(np.array([0.0, math.log(3)]))).data, [0.25, 0.75],
                               rtol=0, atol=1e-15)


def test_softmax_shift_invariance():
    z = rand(3, 5)
    np.testing.assert_allclose(ad.softmax(Tensor(z)).data, ad.softmax(Tensor(z + 123.4)).data, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 40), st.integers(0, 2**31))
def test_softmax_rows_sum_to_one(rows, cols, seed):
    z = np.random.default_rng(seed).uniform(-50, 50, (rows, cols))
    s = ad.softmax(Tensor(z), axis=1).data
    assert np.all(np.abs(s.sum(axis=1) - 1.0) <= 1e-12)


# ---------------------------------------------------------------- backward

def test_backward_relu_sum():
    x = Parameter(np.array([2.0, -1.0]))
    backward(ad.reduce_sum(ad.relu(x)), [x])
    np.testing.assert_array_equal(x.grad, [1.0, 0.0])


def test_backward_dot_product():
    w = Parameter(np.zeros(3))
    x = np.array([1.0, 2.0, 3.0])
    backward(ad.reduce_sum(w * x), [w])
    np.testing.assert_array_equal(w.grad, x)


def test_backward_requires_scalar():
    w = Parameter(np.ones(3))
    with pytest.raises(ValueError):
        backward(w * 2.0, [w])


def test_backward_zeroes_previous_gradients():
    w = Parameter(np.ones(2))
    backward(ad.reduce_sum(w * 3.0), [w])
    backward(ad.reduce_sum(w * 3.0), [w])
    np.testing.assert_array_equal(w.grad, [3.0, 3.0])


def test_computation_record_topological_and_unique():
    a = Parameter(rand(3), "a")
    h = ad.tanh(a)
    loss = ad.reduce_sum(h * h + h)   # h is reused: diamond in the graph
    rec = ComputationRecord.trace(loss)
    position = {id(t): k for k, t in enumerate(rec.nodes)}
    assert len(position) == len(rec.nodes)
    for t in rec.nodes:
        for p in t._parents:
            assert position[id(p)] < position[id(t)]
    backward(loss, [a], record=rec)
    np.testing.assert_allclose(a.grad, (2 * np.tanh(a.data) + 1) * (1 - np.tanh(a.data) ** 2), rtol=1e-13)


def test_no_grad_builds_no_graph():
    w = Parameter(np.ones(2))
    with ad.no_grad():
        out = w * 2.0
    assert not out.requires_grad and out._parents == ()


def test_check_finite_raises_on_nan():
    with check_finite(), np.errstate(invalid="ignore"):
        with pytest.raises(NumericError):
            ad.log(Tensor(np.array([-1.0])))


# every primitive against central differences on small random tensors
PRIMITIVES = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / (b * b + 1.0),
    "broadcast": lambda a, b: a * ad.reduce_sum(b, axis=0),
    "power": lambda a, b: ad.power(a * a + 1.0, 1.5) + b,
    "exp_log": lambda a, b: ad.log(ad.exp(a) + 1.0) + ad.sqrt(b * b + 1.0),
    "tanh_sigmoid": lambda a, b: ad.tanh(a) * ad.sigmoid(b),
    "relu": lambda a, b: ad.relu(a) + b,
    "mean_transpose": lambda a, b: ad.mean(ad.transpose(a), axis=0) + ad.reduce_sum(b, axis=1),
    "reshape": lambda a, b: ad.reshape(a, (12,)) * ad.reshape(b, (12,)),
    "norm": lambda a, b: ad.norm(a, axis=-1) * ad.norm(b, axis=-1),
    "matmul": lambda a, b: ad.matmul(a, ad.transpose(b)),
    "einsum": lambda a, b: ad.einsum("ij,kj->ik", a, b),
    "softmax": lambda a, b: ad.softmax(a, axis=1) * b,
    "log_softmax": lambda a, b: ad.log_softmax(a + b, axis=0),
}


@pytest.mark.parametrize("name", sorted(PRIMITIVES))
def test_primitive_gradients(name):
    fn = PRIMITIVES[name]
    a0, b0 = rand(3, 4, seed=3), rand(3, 4, seed=4)
    weights = rand(*fn(Tensor(a0), Tensor(b0)).shape, seed=5)

    def scalar(a, b):
        return float(np.sum(fn(Tensor(a), Tensor(b)).data * weights))

    a, b = Parameter(a0.copy()), Parameter(b0.copy())
    backward(ad.reduce_sum(fn(a, b) * weights), [a, b])
    np.testing.assert_allclose(a.grad, finite_diff(lambda x: scalar(x, b0), a0.copy()), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(b.grad, finite_diff(lambda x: scalar(a0, x), b0.copy()), rtol=1e-6, atol=1e-8)


SPATIAL = {
    "conv_valid_s2": lambda x, k: ad.conv2d(x, k, stride=2),
    "conv_same": lambda x, k: ad.conv2d(x, k, padding="same"),
    "pool_avg": lambda x, k: ad.pool_avg(ad.conv2d(x, k), 2, 2),
    "pool_max": lambda x, k: ad.pool_max(ad.conv2d(x, k), 2, 1),
    "global_avg": lambda x, k: ad.global_avg_pool(ad.conv2d(x, k)),
    "cross_entropy": lambda x, k: ad.cross_entropy(ad.flatten(ad.conv2d(x, k, stride=3)), np.array([0, 2])),
}


@pytest.mark.parametrize("name", sorted(SPATIAL))
def test_spatial_gradients(name):
    fn = SPATIAL[name]
    x0, k0 = rand(2, 7, 6, 2, seed=6), rand(3, 3, 2, 3, seed=7)
    weights = rand(*fn(Tensor(x0), Tensor(k0)).shape, seed=8)

    def scalar(x, k):
        return float(np.sum(fn(Tensor(x), Tensor(k)).data * weights))

    x, k = Parameter(x0.copy()), Parameter(k0.copy())
    backward(ad.reduce_sum(fn(x, k) * weights), [x, k])
    np.testing.assert_allclose(x.grad, finite_diff(lambda a: scalar(a, k0), x0.copy()), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(k.grad, finite_diff(lambda a: scalar(x0, a), k0.copy()), rtol=1e-6, atol=1e-8)


def test_norm_gradient_is_zero_at_origin():
    x = Parameter(np.zeros(3))
    backward(ad.reduce_sum(ad.norm(x)), [x])
    np.testing.assert_array_equal(x.grad, np.zeros(3))


def test_forward_backward_bitwise_repeatable():
    def run():
        net = LeNet((32, 32), 4, kernel=3, channels=(2, 3, 4), hidden=(8, 6), seed=11)
        x = np.random.default_rng(0).uniform(0, 1, (3, 32, 32))
        loss = net.loss(x, [0, 1, 2])
        backward(loss, net.parameters())
        return loss.item(), [p.grad.copy() for p in net.parameters()]

    (l1, g1), (l2, g2) = run(), run()
    assert l1 == l2
    for a, b in zip(g1, g2):
        assert a.tobytes() == b.tobytes()


# ---------------------------------------------------------------- finite_diff_check

def test_gradcheck_quadratic_is_exact():
    w = Parameter(rand(6), "w")
    report = finite_diff_check([w], lambda: ad.reduce_sum(w * w), tolerance=1e-4, n_samples=6)
    assert report.passed and report.max_error < 1e-8


def small_lenet():
    # wide enough that some units stay active; an all-dead layer puts the
    # next layer exactly on the relu kink where central differences are meaningless
    net = LeNet((8, 8), 3, kernel=1, channels=(4, 6, 8), hidden=(12, 8), seed=2)
    x = np.random.default_rng(1).uniform(0, 1, (2, 8, 8))
    return net, x


def test_gradcheck_lenet_8x8():
    net, x = small_lenet()
    report = check_model(net, lambda: net.loss(x, [0, 2]), 1e-4, 50)
    assert all(np.any(p.grad != 0) for p in net.parameters()), "a layer is dead; pick another seed"
    assert report.passed, report.summary()


def test_gradcheck_detects_corrupted_backward():
    net, x = small_lenet()
    with corrupted_backward():
        report = check_model(net, lambda: net.loss(x, [0, 2]), 1e-4, 50)
    assert not report.passed


def test_gradcheck_requires_float64():
    w = Parameter(np.ones(2, dtype=np.float32))
    with pytest.raises(TypeError):
        finite_diff_check([w], lambda: ad.reduce_sum(w * w))


def test_gradcheck_samples_are_distinct():
    w, b = Parameter(rand(4, 5), "w"), Parameter(rand(2), "b")
    report = finite_diff_check([w, b], lambda: ad.reduce_sum(w * w) + ad.reduce_sum(b * b), n_samples=50)
    keys = [(e.name, e.index) for e in report.entries]
    assert len(keys) == len(set(keys)) == 22
