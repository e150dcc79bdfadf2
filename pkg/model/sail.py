# Self-Attention Interaction Localizer
#
# This module assembles the full model for one (video, image query) pair:
# 1. Region encoder (regions + relative positions + global feature)
# 2. Local transformer video encoder (self-attention, cross-attention, fusion)
# 3. Order-sensitive localizer (forward/backward contexts -> start/end heads)
#
# Ablation flags in SailConfig switch off one mechanism each (RS, ML, LS, BA).

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import SailConfig
from errors import ShapeError
from numeric.params import ParamStore
from numeric.rng import STREAM_INIT, RngState
from numeric.tensor import Tensor, backward
from model.localizer import (
    BoundaryPrediction,
    init_localizer,
    localize,
    predict_boundaries,
    nll_loss,
    sample_nll,
)
from model.region_encoder import ImageQuery, encode_regions, init_region_encoder
from model.video_encoder import (
    VideoEncoderConfig,
    encode_video,
    init_encoder_layer,
    last_cross_attention,
)
from runtime.data import VideoSample, fit_sample


class SailModel:
    """
    Parameters plus forward pass of the localizer.

    Parameters are drawn once from the seed's init stream in a fixed order:
    region encoder, encoder layers 0..L-1, localizer. Two models built from
    equal configs therefore hold bit-identical weights.
    """

    def __init__(self, cfg: SailConfig):
        self.cfg = cfg
        self.encoder_cfg = VideoEncoderConfig(
            layers=cfg.layers,
            window=cfg.window,
            use_local=not cfg.no_local_attention,
            multilevel_cross=not cfg.no_multilevel_cross,
        )
        self.params = ParamStore()
        self._build_params()

    def _build_params(self) -> None:
        cfg = self.cfg
        rng = RngState(cfg.seed).stream(STREAM_INIT)
        self.region = init_region_encoder(self.params, rng, cfg.d_r, cfg.d_g)
        self.layers = [
            init_encoder_layer(self.params, rng, f"encoder.{i}", cfg.d_f, cfg.d_r, cfg.d_ff, cfg.heads, cfg.d_model)
            for i in range(cfg.layers)
        ]
        self.localizer = init_localizer(self.params, rng, cfg.d_f, cfg.d_model)

    def _check(self, frames: np.ndarray, query: ImageQuery) -> None:
        if frames.shape[1] != self.cfg.d_f:
            raise ShapeError("frames", f"expected d_f={self.cfg.d_f}, got {frames.shape[1]}")
        if query.regions.shape[1] != self.cfg.d_r:
            raise ShapeError("region_encoder", f"expected d_r={self.cfg.d_r}, got {query.regions.shape[1]}")
        if query.global_feature.shape[0] != self.cfg.d_g:
            raise ShapeError("region_encoder", f"expected d_g={self.cfg.d_g}, got {query.global_feature.shape[0]}")

    def distributions(
        self,
        frames: np.ndarray,
        query: ImageQuery,
        inspect: Optional[list] = None,
    ) -> Tuple[Tensor, Tensor]:
        """Start and end distributions over the n frames, as recorded tensors."""
        frames = np.asarray(frames, dtype=np.float64)
        self._check(frames, query)
        regions = encode_regions(query, self.region, use_self_attention=not self.cfg.no_region_self_attention)
        hidden = encode_video(frames, regions, self.layers, self.encoder_cfg, inspect)
        return localize(hidden, self.localizer, bidirectional=not self.cfg.no_bidirectional)

    def forward(self, sample: VideoSample) -> BoundaryPrediction:
        sample = fit_sample(sample, self.cfg.n_max)
        inspect: List[Tensor] = []
        p_s, p_e = self.distributions(sample.frames, sample.query, inspect)
        s, e = predict_boundaries(p_s.data, p_e.data, self.cfg.decode)
        return BoundaryPrediction(
            p_s=p_s.data.copy(),
            p_e=p_e.data.copy(),
            s=s,
            e=e,
            cross_attention=last_cross_attention(inspect),
        )

    def sample_loss(self, sample: VideoSample) -> Tensor:
        """Negative log-likelihood of the (downsampled) ground-truth boundaries."""
        sample = fit_sample(sample, self.cfg.n_max)
        p_s, p_e = self.distributions(sample.frames, sample.query)
        return sample_nll(p_s, p_e, sample.s, sample.e)

    def score(self, samples: Sequence[VideoSample]) -> Tuple[List[Tuple[int, int]], Tensor]:
        """Decoded segments and mean negative log-likelihood from one forward pass per sample."""
        preds: List[Tuple[int, int]] = []
        batch = []
        for sample in samples:
            sample = fit_sample(sample, self.cfg.n_max)
            p_s, p_e = self.distributions(sample.frames, sample.query)
            preds.append(predict_boundaries(p_s.data, p_e.data, self.cfg.decode))
            batch.append((p_s, p_e, (sample.s, sample.e)))
        return preds, nll_loss(batch)

    def batch_loss(self, samples: Sequence[VideoSample]) -> Tensor:
        """Mean negative log-likelihood over samples (downsampled to n_max)."""
        return self.score(samples)[1]

    def sample_gradients(self, sample: VideoSample) -> Tuple[float, Dict[str, np.ndarray]]:
        """Loss value and per-parameter gradients of one sample; touches no shared state."""
        loss = self.sample_loss(sample)
        leaves = backward(loss)
        return loss.item(), {leaf.name: g for leaf, g in leaves.items() if leaf.name in self.params}

    def predict(self, samples: Sequence[VideoSample]) -> List[Tuple[int, int]]:
        return [(pred.s, pred.e) for pred in (self.forward(s) for s in samples)]


def create_sail_model(cfg: SailConfig, state: Optional[Dict[str, np.ndarray]] = None) -> SailModel:
    """
    Build a model from its config, optionally restoring saved parameters.

    Args:
        cfg: model configuration
        state: name -> array map, e.g. from a checkpoint
    """
    model = SailModel(cfg)
    if state is not None:
        model.params.load_state_dict(state)
    return model
