"""Scaled dot-product, multi-head, windowed and additive attention."""

import numpy as np
import pytest

from errors import EmptyInputError, ShapeError
from model.attention import (
    AdditiveParams,
    MultiHeadParams,
    additive_atten,
    band_mask,
    dot_atten,
    init_multi_head,
    local_multi_head,
    multi_head,
)
from numeric.params import ParamStore
from numeric.tensor import Tensor


def identity_heads(d: int) -> MultiHeadParams:
    eye = np.eye(d)
    return MultiHeadParams(wq=Tensor(eye[None]), wk=Tensor(eye[None]), wv=Tensor(eye[None]), wo=Tensor(eye))


def random_heads(rng, d_in: int, d_out: int, heads: int = 2, d_model: int = 8) -> MultiHeadParams:
    return init_multi_head(ParamStore(), rng, "mh", d_in, d_in, d_in, d_out, heads, d_model)


class TestDotAtten:

    def test_hand_evaluated_scores(self):
        # q.k1 = 2, q.k2 = 0 with d1 = 4 gives scaled scores (1, 0)
        q = Tensor([[1.0, 1.0, 0.0, 0.0]])
        k = Tensor([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -1.0]])
        v = Tensor([[1.0], [0.0]])
        out, weights = dot_atten(q, k, v)
        assert out.data[0, 0] == pytest.approx(0.7310585786, abs=1e-9)
        np.testing.assert_allclose(weights.data.sum(axis=-1), 1.0, atol=1e-12)

    def test_single_key_returns_value(self):
        rng = np.random.default_rng(0)
        v = Tensor(rng.normal(size=(1, 3)))
        out, _ = dot_atten(Tensor(rng.normal(size=(5, 4))), Tensor(rng.normal(size=(1, 4))), v)
        np.testing.assert_allclose(out.data, np.repeat(v.data, 5, axis=0), atol=1e-12)

    def test_equal_scores_average_values(self):
        k = Tensor([[1.0, 0.0], [1.0, 0.0]])
        v = Tensor([[2.0, 4.0], [6.0, 0.0]])
        out, _ = dot_atten(Tensor([[3.0, 1.0]]), k, v)
        np.testing.assert_allclose(out.data, [[4.0, 2.0]], atol=1e-12)

    def test_output_in_value_hull(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=(7, 3))
        out, _ = dot_atten(Tensor(rng.normal(size=(4, 5))), Tensor(rng.normal(size=(7, 5))), Tensor(v))
        assert (out.data >= v.min(axis=0) - 1e-12).all()
        assert (out.data <= v.max(axis=0) + 1e-12).all()

    def test_no_keys_rejected(self):
        with pytest.raises(EmptyInputError):
            dot_atten(Tensor(np.ones((2, 3))), Tensor(np.ones((0, 3))), Tensor(np.ones((0, 2))))

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            dot_atten(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))), Tensor(np.ones((4, 2))))


class TestMultiHead:

    def test_single_identity_head_is_dot_atten(self):
        rng = np.random.default_rng(2)
        q, k, v = (Tensor(rng.normal(size=(n, 4))) for n in (3, 5, 5))
        expected, _ = dot_atten(q, k, v)
        np.testing.assert_allclose(multi_head(q, k, v, identity_heads(4)).data, expected.data, atol=1e-12)

    def test_joint_key_value_permutation(self):
        rng = np.random.default_rng(3)
        p = random_heads(rng, 6, 5)
        q, kv = Tensor(rng.normal(size=(4, 6))), rng.normal(size=(7, 6))
        perm = rng.permutation(7)
        a = multi_head(q, Tensor(kv), Tensor(kv), p)
        b = multi_head(q, Tensor(kv[perm]), Tensor(kv[perm]), p)
        np.testing.assert_allclose(a.data, b.data, atol=1e-12)

    @pytest.mark.parametrize("n1,n2,d_out", [(1, 1, 3), (4, 9, 6), (10, 2, 1)])
    def test_output_shape(self, n1, n2, d_out):
        rng = np.random.default_rng(n1 * 100 + n2)
        p = random_heads(rng, 6, d_out)
        out = multi_head(Tensor(rng.normal(size=(n1, 6))), Tensor(rng.normal(size=(n2, 6))),
                         Tensor(rng.normal(size=(n2, 6))), p)
        assert out.shape == (n1, d_out)

    def test_weights_are_distributions(self):
        rng = np.random.default_rng(4)
        p = random_heads(rng, 6, 6)
        x = Tensor(rng.normal(size=(5, 6)))
        _, weights = multi_head(x, x, x, p, return_weights=True)
        assert weights.shape == (2, 5, 5)
        np.testing.assert_allclose(weights.data.sum(axis=-1), 1.0, atol=1e-9)

    def test_input_dim_mismatch_rejected(self):
        rng = np.random.default_rng(5)
        p = random_heads(rng, 6, 6)
        with pytest.raises(ShapeError):
            multi_head(Tensor(np.ones((2, 5))), Tensor(np.ones((2, 6))), Tensor(np.ones((2, 6))), p)


class TestLocalMultiHead:

    def test_zero_window_returns_frames(self):
        frames = Tensor(np.random.default_rng(6).normal(size=(6, 4)))
        out = local_multi_head(frames, 0, identity_heads(4))
        np.testing.assert_allclose(out.data, frames.data, atol=1e-12)

    def test_wide_window_equals_global(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 9))
            p = random_heads(rng, 6, 6)
            frames = Tensor(rng.normal(size=(n, 6)))
            w = int(rng.integers(n - 1, n + 3))
            mask = band_mask(n, w)
            assert mask.all()
            expected = multi_head(frames, frames, frames, p).data
            banded = multi_head(frames, frames, frames, p, mask=mask).data
            np.testing.assert_allclose(banded, expected, atol=1e-12)
            np.testing.assert_array_equal(local_multi_head(frames, w, p).data, expected)

    def test_boundary_window_support(self):
        mask = band_mask(10, 2)
        np.testing.assert_array_equal(np.nonzero(mask[0])[0], [0, 1, 2])
        np.testing.assert_array_equal(np.nonzero(mask[5])[0], [3, 4, 5, 6, 7])

    def test_invariant_to_frames_outside_window(self):
        rng = np.random.default_rng(8)
        p = random_heads(rng, 6, 6)
        frames = rng.normal(size=(10, 6))
        changed = frames.copy()
        changed[3:] = rng.normal(size=(7, 6))
        a = local_multi_head(Tensor(frames), 2, p)
        b = local_multi_head(Tensor(changed), 2, p)
        np.testing.assert_allclose(a.data[0], b.data[0], atol=1e-12)
        assert not np.allclose(a.data[1], b.data[1])

    def test_negative_window_rejected(self):
        with pytest.raises(ValueError):
            local_multi_head(Tensor(np.ones((3, 4))), -1, identity_heads(4))


class TestAdditiveAtten:

    @staticmethod
    def scalar_params(w1: float, w2: float, wa: float) -> AdditiveParams:
        return AdditiveParams(w1=Tensor([[w1]]), w2=Tensor([[w2]]), wa=Tensor([wa]))

    def test_single_key(self):
        rng = np.random.default_rng(9)
        p = AdditiveParams(w1=Tensor(rng.normal(size=(3, 4))), w2=Tensor(rng.normal(size=(2, 4))),
                           wa=Tensor(rng.normal(size=4)))
        key = rng.normal(size=(1, 2))
        context, weights = additive_atten(Tensor(rng.normal(size=3)), Tensor(key), p)
        np.testing.assert_allclose(weights.data, [1.0])
        np.testing.assert_allclose(context.data, key[0], atol=1e-12)

    def test_identical_keys_uniform(self):
        p = self.scalar_params(0.7, -1.3, 2.0)
        context, weights = additive_atten(Tensor([0.4]), Tensor([[1.5], [1.5], [1.5]]), p)
        np.testing.assert_allclose(weights.data, [1 / 3] * 3, atol=1e-12)
        np.testing.assert_allclose(context.data, [1.5], atol=1e-12)

    def test_one_dimensional_hand_evaluation(self):
        # scores are tanh(0) = 0 and tanh(10) ~ 1
        p = self.scalar_params(0.0, 1.0, 1.0)
        context, weights = additive_atten(Tensor([3.0]), Tensor([[0.0], [10.0]]), p)
        expected = np.exp([0.0, np.tanh(10.0)])
        expected /= expected.sum()
        np.testing.assert_allclose(weights.data, expected, atol=1e-12)
        np.testing.assert_allclose(weights.data, [0.26894, 0.73106], atol=1e-5)
        assert context.data[0] == pytest.approx(7.3106, abs=1e-4)

    def test_no_keys_rejected(self):
        with pytest.raises(EmptyInputError):
            additive_atten(Tensor([1.0]), Tensor(np.ones((0, 1))), self.scalar_params(1.0, 1.0, 1.0))
