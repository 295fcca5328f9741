"""Forward semantics of the tensor op set, checked against hand values
and brute-force oracles."""

import math

import numpy as np
import pytest

import helpers
from modtag import tensor as T
from modtag.tensor import Graph, ShapeError, Tensor


def t64(data):
    return Tensor(np.asarray(data, dtype=np.float64))


class TestElementwise:
    def test_add(self):
        out = T.add(Tensor([1.0, 2.0]), Tensor([3.0, 4.0]))
        np.testing.assert_array_equal(out.data, [4.0, 6.0])

    def test_mul_identity(self):
        x = Tensor(np.arange(6, dtype=np.float32).reshape(2, 3))
        out = T.mul(x, Tensor(np.ones((2, 3))))
        np.testing.assert_array_equal(out.data, x.data)

    def test_sub(self):
        out = T.sub(Tensor([5.0, 1.0]), Tensor([2.0, 3.0]))
        np.testing.assert_array_equal(out.data, [3.0, -2.0])

    def test_broadcast_trailing(self):
        out = T.add(Tensor(np.zeros((2, 3))), Tensor([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(out.data, [[1, 2, 3], [1, 2, 3]])

    def test_shape_mismatch_raises(self):
        with pytest.raises(ShapeError):
            T.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))

    def test_relu(self):
        out = T.relu(Tensor([-1.0, 2.0]))
        np.testing.assert_array_equal(out.data, [0.0, 2.0])

    def test_sigmoid_zero(self):
        assert T.sigmoid(Tensor([0.0])).data[0] == pytest.approx(0.5)

    def test_sigmoid_finite_at_extremes(self):
        out = T.sigmoid(t64([-1e4, 1e4]))
        assert np.isfinite(out.data).all()
        assert out.data[0] == pytest.approx(0.0, abs=1e-30)
        assert out.data[1] == pytest.approx(1.0)

    def test_softplus_finite_at_extremes(self):
        out = T.softplus(t64([-1e4, 0.0, 1e4]))
        assert np.isfinite(out.data).all()
        assert out.data[1] == pytest.approx(math.log(2.0))
        assert out.data[2] == pytest.approx(1e4)

    def test_scalar_operand_keeps_dtype(self):
        x = Tensor(np.ones(3, dtype=np.float32))
        assert (x * 2.0).dtype == np.float32
        assert (1.0 + x).dtype == np.float32


class TestMatmul:
    def test_identity(self):
        x = np.random.default_rng(0).normal(size=(4, 4))
        out = T.matmul(t64(x), t64(np.eye(4)))
        np.testing.assert_allclose(out.data, x)

    def test_hand_2x2(self):
        out = T.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(out.data, [[1, 2], [3, 4]])

    def test_vs_triple_loop(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(5, 7))
        b = rng.normal(size=(7, 3))
        out = T.matmul(t64(a), t64(b))
        np.testing.assert_allclose(out.data, helpers.matmul_triple_loop(a, b), atol=1e-6)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))


class TestConv1dSame:
    def test_unit_impulse_is_identity(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=17)
        k = np.zeros(5)
        k[2] = 1.0
        out = T.conv1d_same(t64(x), t64(k))
        np.testing.assert_allclose(out.data, x)

    def test_zero_signal(self):
        out = T.conv1d_same(t64(np.zeros(10)), t64(np.ones(3)))
        np.testing.assert_array_equal(out.data, np.zeros(10))

    def test_random_vs_double_loop(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=64)
        k = rng.normal(size=101)
        out = T.conv1d_same(t64(x), t64(k))
        assert np.max(np.abs(out.data - helpers.conv1d_double_loop(x, k))) < 1e-5

    @pytest.mark.parametrize("t_len", [1, 7, 101, 311])
    @pytest.mark.parametrize("length", [1, 3, 101])
    def test_grid_vs_double_loop(self, t_len, length):
        rng = np.random.default_rng(t_len * 1000 + length)
        x = rng.normal(size=t_len)
        k = rng.normal(size=length)
        out = T.conv1d_same(t64(x), t64(k))
        assert np.max(np.abs(out.data - helpers.conv1d_double_loop(x, k))) < 1e-5

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            T.conv1d_same(Tensor(np.zeros(8)), Tensor(np.zeros(4)))

    def test_batched_rows_match_single(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 33))
        k = rng.normal(size=7)
        out = T.conv1d_same(t64(x), t64(k))
        for row in range(4):
            np.testing.assert_allclose(out.data[row], helpers.conv1d_double_loop(x[row], k), atol=1e-10)


class TestConv2d:
    @pytest.mark.parametrize("stride,padding", [((1, 1), (1, 1)), ((2, 2), (1, 1)), ((2, 2), (0, 0))])
    def test_vs_scalar_loops(self, stride, padding):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, 3, 6, 7))
        w = rng.normal(size=(4, 3, 3, 3))
        out = T.conv2d(t64(x), t64(w), stride=stride, padding=padding)
        np.testing.assert_allclose(out.data, helpers.conv2d_loops(x, w, stride, padding), atol=1e-10)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            T.conv2d(Tensor(np.zeros((1, 3, 5, 5))), Tensor(np.zeros((2, 4, 3, 3))))


class TestPoolingAndLinear:
    def test_mean_pool_hand(self):
        x = Tensor(np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4))
        out = T.mean_pool(x, 2)
        np.testing.assert_allclose(out.data[0, 0], [[2.5, 4.5], [10.5, 12.5]])

    def test_mean_pool_indivisible(self):
        with pytest.raises(ShapeError):
            T.mean_pool(Tensor(np.zeros((1, 1, 5, 4))), 2)

    def test_global_avg_pool(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 3, 4, 5))
        out = T.global_avg_pool(t64(x))
        np.testing.assert_allclose(out.data, x.mean(axis=(2, 3)))

    def test_linear(self):
        rng = np.random.default_rng(1)
        x, w, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 4)), rng.normal(size=4)
        out = T.linear(t64(x), t64(w), t64(b))
        np.testing.assert_allclose(out.data, x @ w + b)


class TestLosses:
    def test_bce_half(self):
        loss = T.bce_with_logits(t64([[0.0]]), np.array([[1.0]]))
        assert loss.item() == pytest.approx(math.log(2.0), rel=1e-6)

    def test_bce_saturated_correct(self):
        loss = T.bce_with_logits(t64([[20.0]]), np.array([[1.0]]))
        assert loss.item() == pytest.approx(0.0, abs=1e-6)

    def test_bce_vs_naive(self):
        rng = np.random.default_rng(9)
        z = rng.normal(size=(8, 5)) * 3
        t = (rng.random((8, 5)) > 0.5).astype(np.float64)
        loss = T.bce_with_logits(t64(z), t)
        assert abs(loss.item() - helpers.bce_naive(z, t)) < 1e-6

    def test_bce_rejects_nonbinary(self):
        with pytest.raises(ValueError):
            T.bce_with_logits(Tensor([[0.0]]), np.array([[0.5]]))

    def test_cross_entropy_uniform(self):
        loss = T.cross_entropy(t64(np.zeros((4, 35))), np.zeros(4, dtype=int))
        assert loss.item() == pytest.approx(math.log(35.0), rel=1e-6)

    def test_cross_entropy_dominant(self):
        z = np.full((1, 5), -10.0)
        z[0, 3] = 10.0
        loss = T.cross_entropy(t64(z), np.array([3]))
        assert loss.item() == pytest.approx(0.0, abs=1e-6)

    def test_cross_entropy_label_range(self):
        with pytest.raises(ValueError):
            T.cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))

    def test_cross_entropy_grad_is_softmax_minus_onehot(self):
        rng = np.random.default_rng(11)
        z = rng.normal(size=(3, 5))
        labels = np.array([1, 4, 0])
        zt = Tensor(z.copy(), requires_grad=True, dtype=np.float64)
        with Graph() as g:
            loss = T.cross_entropy(zt, labels)
            g.backward(loss)
        p = np.exp(z - z.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        onehot = np.eye(5)[labels]
        np.testing.assert_allclose(zt.grad, (p - onehot) / 3, atol=1e-12)


class TestGraph:
    def test_backward_twice_errors(self):
        x = Tensor([2.0], requires_grad=True)
        with Graph() as g:
            y = T.tsum(T.mul(x, x))
        g.backward(y)
        with pytest.raises(T.GraphError):
            g.backward(y)

    def test_nonscalar_root_errors(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Graph() as g:
            y = T.mul(x, x)
        with pytest.raises(T.GraphError):
            g.backward(y)

    def test_no_recording_outside_graph(self):
        x = Tensor([1.0], requires_grad=True)
        y = T.mul(x, x)
        assert not y._traced

    def test_grad_accumulates_over_reuse(self):
        x = Tensor([3.0], requires_grad=True)
        with Graph() as g:
            y = T.tsum(T.add(T.mul(x, x), x))
            g.backward(y)
        np.testing.assert_allclose(x.grad, [7.0])

    def test_constants_get_no_grad(self):
        x = Tensor([3.0], requires_grad=True)
        c = Tensor([2.0])
        with Graph() as g:
            g.backward(T.tsum(T.mul(x, c)))
        assert c.grad is None


class TestShapeOps:
    def test_concat_and_reshape_roundtrip(self):
        a = Tensor(np.arange(6, dtype=np.float64).reshape(2, 3))
        b = Tensor(np.arange(6, 12, dtype=np.float64).reshape(2, 3))
        out = T.reshape(T.concat([a, b], axis=0), (3, 4))
        assert out.shape == (3, 4)
        np.testing.assert_array_equal(out.data.reshape(-1), np.arange(12))

    def test_transpose(self):
        x = np.arange(24, dtype=np.float64).reshape(2, 3, 4)
        out = T.transpose(Tensor(x), (2, 0, 1))
        np.testing.assert_array_equal(out.data, x.transpose(2, 0, 1))

    def test_sum_mean_axes(self):
        x = np.arange(12, dtype=np.float64).reshape(3, 4)
        assert T.tsum(Tensor(x)).item() == pytest.approx(66.0)
        np.testing.assert_allclose(T.mean(Tensor(x), axis=0).data, x.mean(axis=0))
