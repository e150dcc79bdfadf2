"""End-to-end model assembly, ablations and sequence-length fitting."""

import numpy as np
import pytest

from errors import DataError, ShapeError
from model.sail import SailModel, create_sail_model
from numeric.gradcheck import grad_check
from runtime.data import VideoSample, downsample_indices, fit_sample, iterate_batches, remap_index
from conftest import make_sample


class TestForward:

    def test_distributions_cover_every_frame(self, micro_cfg, micro_sample):
        pred = SailModel(micro_cfg).forward(micro_sample)
        assert pred.p_s.shape == (6,) and pred.p_e.shape == (6,)
        assert abs(pred.p_s.sum() - 1.0) < 1e-9
        assert abs(pred.p_e.sum() - 1.0) < 1e-9
        assert 1 <= pred.s <= 6 and 1 <= pred.e <= 6
        assert pred.cross_attention.shape == (6, 3)

    def test_equal_seeds_are_bit_identical(self, micro_cfg, micro_sample):
        a, b = SailModel(micro_cfg), SailModel(micro_cfg)
        for name in a.params.names():
            np.testing.assert_array_equal(a.params[name].data, b.params[name].data)
        pa, pb = a.forward(micro_sample), b.forward(micro_sample)
        np.testing.assert_array_equal(pa.p_s, pb.p_s)
        np.testing.assert_array_equal(pa.p_e, pb.p_e)

    def test_different_seeds_differ(self, micro_cfg):
        other = micro_cfg.model_copy(update={"seed": micro_cfg.seed + 1})
        a, b = SailModel(micro_cfg), SailModel(other)
        assert not np.array_equal(a.params["region.w_r"].data, b.params["region.w_r"].data)

    def test_initialization_bounds(self, micro_cfg):
        model = SailModel(micro_cfg)
        np.testing.assert_array_equal(model.params["region.ln.gain"].data, np.ones(8))
        np.testing.assert_array_equal(model.params["localizer.start.b"].data, np.zeros(8))
        bound = np.sqrt(6.0 / (8 + 8))
        assert np.abs(model.params["encoder.0.fusion.w"].data).max() <= np.sqrt(6.0 / (32 + 8))
        assert np.abs(model.params["region.w_g"].data).max() <= bound

    def test_end_to_end_gradients(self, micro_cfg, micro_sample):
        model = SailModel(micro_cfg)
        report = grad_check(lambda: model.sample_loss(micro_sample), model.params,
                            max_entries=6, rng=np.random.default_rng(0))
        assert report.passed, report.per_param

    def test_sample_gradients_cover_all_parameters(self, micro_cfg, micro_sample):
        model = SailModel(micro_cfg)
        loss, grads = model.sample_gradients(micro_sample)
        assert loss == pytest.approx(model.sample_loss(micro_sample).item())
        assert set(grads) == set(model.params.names())
        for name, g in grads.items():
            assert g.shape == model.params[name].shape

    @pytest.mark.parametrize("flag", [
        "no_region_self_attention",
        "no_multilevel_cross",
        "no_local_attention",
        "no_bidirectional",
    ])
    def test_ablations_change_the_output(self, micro_cfg, micro_sample, flag):
        cfg = micro_cfg.model_copy(update={"layers": 2})
        ablated = cfg.model_copy(update={flag: True})
        full = SailModel(cfg).forward(micro_sample)
        pred = SailModel(ablated).forward(micro_sample)
        assert abs(pred.p_s.sum() - 1.0) < 1e-9
        assert not np.allclose(full.p_s, pred.p_s)

    def test_constrained_decoding_orders_boundaries(self, micro_cfg, marked_samples):
        model = SailModel(micro_cfg.model_copy(update={"decode": "constrained"}))
        for s, e in model.predict(marked_samples):
            assert s <= e

    def test_frame_dimension_mismatch_names_component(self, micro_cfg):
        sample = make_sample(np.random.default_rng(0), d=6)
        with pytest.raises(ShapeError, match="frames"):
            SailModel(micro_cfg).forward(sample)

    def test_restored_state(self, micro_cfg, micro_sample):
        source = SailModel(micro_cfg.model_copy(update={"seed": 99}))
        restored = create_sail_model(micro_cfg, source.params.state_dict())
        np.testing.assert_array_equal(restored.forward(micro_sample).p_s, source.forward(micro_sample).p_s)


class TestFitSample:

    def test_remap_rounds_and_clips(self):
        assert remap_index(2, 6, 4) == 1
        assert remap_index(4, 6, 4) == 3
        assert remap_index(1, 1000, 200) == 1
        assert remap_index(1000, 1000, 200) == 200

    def test_downsample_indices_are_increasing(self):
        idx = downsample_indices(1000, 200)
        assert idx.shape == (200,)
        assert idx[0] == 0 and idx[-1] < 1000
        assert (np.diff(idx) > 0).all()

    def test_long_sample_is_fitted(self, micro_cfg):
        sample = make_sample(np.random.default_rng(1), n=12, s=5, e=9)
        fitted = fit_sample(sample, 4)
        assert fitted.n == 4
        assert (fitted.s, fitted.e) == (2, 3)
        pred = SailModel(micro_cfg.model_copy(update={"n_max": 4})).forward(sample)
        assert pred.p_s.shape == (4,)

    def test_order_preserved_for_short_targets(self):
        rng = np.random.default_rng(2)
        for n in range(201, 400, 7):
            s = int(rng.integers(1, n + 1))
            sample = make_sample(rng, n=n, s=s, e=s)
            fitted = fit_sample(sample, 200)
            assert 1 <= fitted.s <= fitted.e <= 200

    def test_short_sample_untouched(self, micro_sample):
        assert fit_sample(micro_sample, 200) is micro_sample

    def test_invalid_target_rejected(self, micro_sample):
        with pytest.raises(DataError):
            VideoSample(sample_id="bad", frames=np.zeros((3, 8)), s=2, e=4, query=micro_sample.query)


class TestBatches:

    def test_unshuffled_batches_keep_order(self, marked_samples):
        batches = list(iterate_batches(marked_samples[:10], 4))
        assert [len(b) for b in batches] == [4, 4, 2]
        assert batches[0][0] is marked_samples[0]

    def test_seeded_shuffle_is_reproducible(self, marked_samples):
        a = [s.sample_id for b in iterate_batches(marked_samples, 5, np.random.default_rng(3)) for s in b]
        b = [s.sample_id for b in iterate_batches(marked_samples, 5, np.random.default_rng(3)) for s in b]
        assert a == b
        assert sorted(a) == sorted(s.sample_id for s in marked_samples)
