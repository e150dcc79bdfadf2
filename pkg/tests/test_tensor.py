"""Reverse-mode differentiation, softmax and layer norm."""

import numpy as np
import pytest

from errors import EmptyInputError, GraphCycleError, ShapeError
from numeric.params import ParamStore
from numeric.gradcheck import grad_check
from numeric.tensor import (
    Tensor,
    backward,
    concat,
    getitem,
    layer_norm,
    matmul,
    parameter,
    safe_log,
    softmax,
    softmax_rows,
    softplus,
    stack,
    tanh,
    tsum,
)


class TestSoftmax:

    def test_symmetric_input(self):
        np.testing.assert_allclose(softmax(np.array([0.0, 0.0])).data, [0.5, 0.5])

    def test_log_two(self):
        np.testing.assert_allclose(softmax(np.array([np.log(2.0), 0.0])).data, [2 / 3, 1 / 3], atol=1e-15)

    def test_large_logits_are_stable(self):
        out = softmax(np.array([1000.0, 0.0])).data
        assert np.isfinite(out).all()
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-9)

    def test_rows_sum_to_one(self):
        x = np.random.default_rng(0).normal(scale=20.0, size=(7, 5))
        np.testing.assert_allclose(softmax_rows(x).data.sum(axis=1), 1.0, atol=1e-12)

    def test_mask_zeroes_positions(self):
        mask = np.array([[True, False, True]])
        out = softmax(np.array([[1.0, 50.0, 1.0]]), mask=mask).data
        np.testing.assert_array_equal(out, [[0.5, 0.0, 0.5]])

    def test_empty_axis_rejected(self):
        with pytest.raises(EmptyInputError):
            softmax(np.zeros((2, 0)))

    def test_softmax_rows_requires_rank_two(self):
        with pytest.raises(ShapeError):
            softmax_rows(np.zeros(3))


class TestLayerNorm:

    def test_constant_input(self):
        out = layer_norm(np.array([5.0, 5.0, 5.0]), np.ones(3), np.zeros(3)).data
        np.testing.assert_allclose(out, [0.0, 0.0, 0.0], atol=1e-12)

    def test_two_values(self):
        out = layer_norm(np.array([1.0, 3.0]), np.ones(2), np.zeros(2), eps=1e-12).data
        np.testing.assert_allclose(out, [-1.0, 1.0], atol=1e-9)

    def test_gain_and_bias(self):
        out = layer_norm(np.array([1.0, 3.0]), np.full(2, 2.0), np.ones(2), eps=1e-12).data
        np.testing.assert_allclose(out, [-1.0, 3.0], atol=1e-9)

    def test_rows_normalized_independently(self):
        x = np.random.default_rng(1).normal(size=(4, 6)) * 10 + 3
        out = layer_norm(x, np.ones(6), np.zeros(6)).data
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-5)

    def test_gain_shape_checked(self):
        with pytest.raises(ShapeError):
            layer_norm(np.zeros((2, 3)), np.ones(2), np.zeros(3))


class TestBackward:

    def test_square(self):
        x = parameter(3.0, "x")
        grads = backward(x * x)
        assert grads[x] == pytest.approx(6.0)

    def test_sum_of_softmax_has_zero_gradient(self):
        x = parameter(np.random.default_rng(2).normal(size=5), "x")
        grads = backward(tsum(softmax(x)))
        np.testing.assert_allclose(grads[x], 0.0, atol=1e-15)

    def test_shared_subexpression_accumulates(self):
        x = parameter(2.0, "x")
        y = x * x
        grads = backward(y + y)
        assert grads[x] == pytest.approx(8.0)

    def test_broadcast_gradient_is_reduced(self):
        b = parameter(np.zeros(3), "b")
        x = Tensor(np.ones((4, 3)))
        grads = backward(tsum(x + b))
        np.testing.assert_array_equal(grads[b], [4.0, 4.0, 4.0])

    def test_non_scalar_loss_rejected(self):
        with pytest.raises(ShapeError):
            backward(parameter(np.ones(2), "x") * 2.0)

    def test_constant_loss_has_no_gradients(self):
        assert backward(Tensor(1.0)) == {}

    def test_cycle_detected(self):
        a = parameter(1.0, "a")
        b = a * 2.0
        a.parents = (b,)
        with pytest.raises(GraphCycleError):
            backward(b)

    def test_store_accumulates(self):
        store = ParamStore()
        w = store.add("w", np.array([1.0, 2.0]))
        backward(tsum(w * w), store)
        backward(tsum(w * w), store)
        np.testing.assert_array_equal(store.grad("w"), [4.0, 8.0])


class TestMatmul:

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_matrix_vector_and_batch_gradients(self):
        rng = np.random.default_rng(4)
        store = ParamStore()
        a = store.add("a", rng.normal(size=(2, 3, 4)))
        b = store.add("b", rng.normal(size=(4, 5)))
        v = store.add("v", rng.normal(size=5))

        def loss():
            return tsum(tanh(matmul(matmul(a, b), v)))

        report = grad_check(loss, store)
        assert report.passed, report.per_param


class TestCompositeGradients:

    def test_indexing_concat_stack_softplus(self):
        rng = np.random.default_rng(5)
        store = ParamStore()
        x = store.add("x", rng.normal(size=(4, 3)))
        y = store.add("y", rng.normal(size=(4, 2)))

        def loss():
            joined = concat([x, y], axis=-1)
            picked = getitem(joined, (np.array([0, 2, 2]), slice(None)))
            rows = stack([picked[0], picked[1] * picked[2]], axis=0)
            return tsum(softplus(rows)) + tsum(safe_log(softmax(x)))

        report = grad_check(loss, store)
        assert report.passed, report.per_param
