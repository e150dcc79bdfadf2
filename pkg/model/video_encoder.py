# Local Transformer Encoder
#
# Purpose: multi-step fusion of frame sequences with the encoded image regions.
# Each layer: local multi-head self-attention -> cross-attention over regions
# with tanh fusion -> position-wise feed-forward, every sublayer layer-normed.

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from errors import ShapeError
from numeric.params import ParamStore, init_ones, init_weight, init_zeros
from numeric.tensor import Tensor, concat, layer_norm, matmul, relu, tanh
from model.attention import MultiHeadParams, init_multi_head, local_multi_head, multi_head


@dataclass
class EncoderLayerParams:
    self_attn: MultiHeadParams
    cross_attn: MultiHeadParams
    w_f: Tensor  # (4 d_f, d_f)
    b_f: Tensor
    w1: Tensor  # (d_f, d_ff)
    b1: Tensor
    w2: Tensor  # (d_ff, d_f)
    b2: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    ln3_gain: Tensor
    ln3_bias: Tensor


@dataclass
class VideoEncoderConfig:
    layers: int
    window: int
    use_local: bool = True  # False: ablation w/o LS (global self-attention)
    multilevel_cross: bool = True  # False: ablation w/o ML (cross-attention only in the last layer)

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("encoder needs at least one layer")
        if self.window < 0:
            raise ValueError("window radius must be non-negative")

    def has_cross_attention(self, layer_index: int) -> bool:
        return self.multilevel_cross or layer_index == self.layers - 1


def init_encoder_layer(
    store: ParamStore,
    rng: np.random.Generator,
    prefix: str,
    d_f: int,
    d_r: int,
    d_ff: int,
    heads: int,
    d_model: int,
) -> EncoderLayerParams:
    return EncoderLayerParams(
        self_attn=init_multi_head(store, rng, f"{prefix}.self_attn", d_f, d_f, d_f, d_f, heads, d_model),
        cross_attn=init_multi_head(store, rng, f"{prefix}.cross_attn", d_f, d_r, d_r, d_f, heads, d_model),
        w_f=init_weight(store, rng, f"{prefix}.fusion.w", (4 * d_f, d_f)),
        b_f=init_zeros(store, f"{prefix}.fusion.b", (d_f,)),
        w1=init_weight(store, rng, f"{prefix}.ffn.w1", (d_f, d_ff)),
        b1=init_zeros(store, f"{prefix}.ffn.b1", (d_ff,)),
        w2=init_weight(store, rng, f"{prefix}.ffn.w2", (d_ff, d_f)),
        b2=init_zeros(store, f"{prefix}.ffn.b2", (d_f,)),
        ln1_gain=init_ones(store, f"{prefix}.ln1.gain", (d_f,)),
        ln1_bias=init_zeros(store, f"{prefix}.ln1.bias", (d_f,)),
        ln2_gain=init_ones(store, f"{prefix}.ln2.gain", (d_f,)),
        ln2_bias=init_zeros(store, f"{prefix}.ln2.bias", (d_f,)),
        ln3_gain=init_ones(store, f"{prefix}.ln3.gain", (d_f,)),
        ln3_bias=init_zeros(store, f"{prefix}.ln3.bias", (d_f,)),
    )


def temporal_encoding(n: int, d_f: int) -> np.ndarray:
    """Sinusoidal encoding, (n, d_f): [pos, 2k] = sin(pos / 10000^(2k/d_f)), [pos, 2k+1] = cos(...)."""
    if n < 1:
        raise ValueError("temporal encoding needs n >= 1")
    if d_f % 2 != 0:
        raise ValueError(f"temporal encoding needs an even dimension, got {d_f}")
    pos = np.arange(n, dtype=np.float64)[:, None]
    freq = np.power(10000.0, np.arange(0, d_f, 2, dtype=np.float64) / d_f)
    enc = np.empty((n, d_f))
    enc[:, 0::2] = np.sin(pos / freq)
    enc[:, 1::2] = np.cos(pos / freq)
    return enc


def fusion(a: Tensor, b: Tensor, w_f: Tensor, b_f: Tensor) -> Tensor:
    """tanh(W_f [a; b; a*b; a-b] + b_f) per position."""
    if a.shape != b.shape:
        raise ShapeError("fusion", f"inputs differ in shape: {a.shape} vs {b.shape}")
    if w_f.shape != (4 * a.shape[-1], a.shape[-1]):
        raise ShapeError("fusion", f"W_f must be ({4 * a.shape[-1]}, {a.shape[-1]}), got {w_f.shape}")
    return tanh(matmul(concat([a, b, a * b, a - b], axis=-1), w_f) + b_f)


def feed_forward(x: Tensor, p: EncoderLayerParams) -> Tensor:
    return matmul(relu(matmul(x, p.w1) + p.b1), p.w2) + p.b2


def encoder_layer(
    frames: Tensor,
    regions: Tensor,
    p: EncoderLayerParams,
    cfg: VideoEncoderConfig,
    cross_attention: bool = True,
    inspect: Optional[list] = None,
) -> Tensor:
    """
    One encoder layer over (n, d_f) frames and (m, d_r) encoded regions.

    F1 = LN(LocalMultiHead(F, F, F) + F)
    F2 = LN(Fusion(F1, MultiHead(F1, H^r, H^r)))   (skipped, F2 = F1, without cross-attention)
    F3 = LN(F2 + FFN(F2))
    """
    if frames.ndim != 2:
        raise ShapeError("encoder_layer", f"frames must be (n, d_f), got {frames.shape}")
    if cfg.use_local:
        attended = local_multi_head(frames, cfg.window, p.self_attn)
    else:
        attended = multi_head(frames, frames, frames, p.self_attn)
    f1 = layer_norm(attended + frames, p.ln1_gain, p.ln1_bias)

    if cross_attention:
        query_aware, weights = multi_head(f1, regions, regions, p.cross_attn, return_weights=True)
        if inspect is not None:
            inspect.append(weights)
        f2 = layer_norm(fusion(f1, query_aware, p.w_f, p.b_f), p.ln2_gain, p.ln2_bias)
    else:
        f2 = f1

    return layer_norm(f2 + feed_forward(f2, p), p.ln3_gain, p.ln3_bias)


def encode_video(
    frames: np.ndarray,
    regions: Tensor,
    layers: List[EncoderLayerParams],
    cfg: VideoEncoderConfig,
    inspect: Optional[list] = None,
) -> Tensor:
    """Add the temporal encoding once, then apply the layers in order; returns H^v (n, d_f)."""
    frames = np.asarray(frames, dtype=np.float64)
    if len(layers) != cfg.layers:
        raise ShapeError("encode_video", f"config asks for {cfg.layers} layers, got {len(layers)} parameter sets")
    n, d_f = frames.shape
    hidden = Tensor(frames + temporal_encoding(n, d_f))
    for index, layer in enumerate(layers):
        hidden = encoder_layer(hidden, regions, layer, cfg, cfg.has_cross_attention(index), inspect)
    return hidden


def last_cross_attention(inspect: List[Tensor]) -> Optional[np.ndarray]:
    """Head-averaged (n, m) cross-attention weights of the deepest layer that used them."""
    if not inspect:
        return None
    return inspect[-1].data.mean(axis=0)
