# Region Self-Attention Encoder
#
# Purpose: fine-grained image-region representations. Regions attend to each
# other with keys and values augmented by projected relative box positions,
# then residual + projected global feature + layer norm.

from dataclasses import dataclass

import numpy as np

from errors import DataError, ShapeError
from numeric.params import ParamStore, init_ones, init_weight, init_zeros
from numeric.tensor import Tensor, as_tensor, layer_norm, matmul, reshape, softmax, tsum


@dataclass
class ImageQuery:
    """m region vectors, m boxes (x, y, w, h) with center coordinates, one global feature."""
    regions: np.ndarray  # (m, d_r)
    boxes: np.ndarray  # (m, 4)
    global_feature: np.ndarray  # (d_g,)

    def __post_init__(self):
        self.regions = np.asarray(self.regions, dtype=np.float64)
        self.boxes = np.asarray(self.boxes, dtype=np.float64)
        self.global_feature = np.asarray(self.global_feature, dtype=np.float64)
        validate_query(self)

    @property
    def m(self) -> int:
        return self.regions.shape[0]


def validate_query(q: ImageQuery) -> None:
    if q.regions.ndim != 2 or q.regions.shape[0] < 1:
        raise DataError(f"image query needs at least one region, got regions of shape {q.regions.shape}")
    if q.boxes.shape != (q.regions.shape[0], 4):
        raise DataError(f"expected boxes of shape ({q.regions.shape[0]}, 4), got {q.boxes.shape}")
    if not (q.boxes[:, 2:] > 0).all():
        raise DataError("box widths and heights must be strictly positive")
    if q.global_feature.ndim != 1:
        raise DataError("global feature must be a vector")


@dataclass
class RegionEncoderParams:
    w_r: Tensor  # (4, d_r) relative-position projection
    w_g: Tensor  # (d_g, d_r) global-feature projection
    ln_gain: Tensor
    ln_bias: Tensor


def init_region_encoder(store: ParamStore, rng: np.random.Generator, d_r: int, d_g: int) -> RegionEncoderParams:
    return RegionEncoderParams(
        w_r=init_weight(store, rng, "region.w_r", (4, d_r)),
        w_g=init_weight(store, rng, "region.w_g", (d_g, d_r)),
        ln_gain=init_ones(store, "region.ln.gain", (d_r,)),
        ln_bias=init_zeros(store, "region.ln.bias", (d_r,)),
    )


def relative_position(p_i: np.ndarray, p_j: np.ndarray) -> np.ndarray:
    """((x_i-x_j)/w_j, (y_i-y_j)/h_j, log(w_i/w_j), log(h_i/h_j)) for center/size boxes."""
    p_i = np.asarray(p_i, dtype=np.float64)
    p_j = np.asarray(p_j, dtype=np.float64)
    if p_i[2] <= 0 or p_i[3] <= 0 or p_j[2] <= 0 or p_j[3] <= 0:
        raise DataError("box widths and heights must be strictly positive")
    return np.array([
        (p_i[0] - p_j[0]) / p_j[2],
        (p_i[1] - p_j[1]) / p_j[3],
        np.log(p_i[2] / p_j[2]),
        np.log(p_i[3] / p_j[3]),
    ])


def relative_position_matrix(boxes: np.ndarray) -> np.ndarray:
    """(m, m, 4) array whose [i, j] entry is relative_position(box_i, box_j)."""
    boxes = np.asarray(boxes, dtype=np.float64)
    if not (boxes[:, 2:] > 0).all():
        raise DataError("box widths and heights must be strictly positive")
    xi, yi, wi, hi = (boxes[:, None, k] for k in range(4))
    xj, yj, wj, hj = (boxes[None, :, k] for k in range(4))
    return np.stack([(xi - xj) / wj, (yi - yj) / hj, np.log(wi / wj), np.log(hi / hj)], axis=-1)


def region_self_atten(regions: Tensor, boxes: np.ndarray, w_r: Tensor) -> Tensor:
    """
    Row i = Softmax(r_i^T (R + P_i) / sqrt(d_r)) (R + P_i)^T where P_i[j] = W^r p_ij.

    Keys and values are both position-augmented. Returns (m, d_r).
    """
    regions = as_tensor(regions)
    m, d_r = regions.shape
    if w_r.shape != (4, d_r):
        raise ShapeError("region_self_atten", f"W^r must be (4, {d_r}), got {w_r.shape}")
    rel = Tensor(relative_position_matrix(boxes))  # (m, m, 4)
    augmented = reshape(regions, (1, m, d_r)) + matmul(rel, w_r)  # [i, j] = r_j + W^r p_ij
    scores = tsum(augmented * reshape(regions, (m, 1, d_r)), axis=-1) * (1.0 / np.sqrt(d_r))
    weights = softmax(scores, axis=-1)  # (m, m)
    return tsum(augmented * reshape(weights, (m, m, 1)), axis=1)


def encode_regions(q: ImageQuery, p: RegionEncoderParams, use_self_attention: bool = True) -> Tensor:
    """
    H^r row i = LayerNorm(h~_i + r_i + W_g f^g), shape (m, d_r).

    With use_self_attention=False (ablation w/o RS) the attention term is dropped.
    """
    regions = Tensor(q.regions)
    if p.w_g.shape[0] != q.global_feature.shape[0]:
        raise ShapeError("encode_regions", f"global feature has {q.global_feature.shape[0]} dims, W_g expects {p.w_g.shape[0]}")
    if p.w_r.shape[1] != q.regions.shape[1]:
        raise ShapeError("encode_regions", f"regions have {q.regions.shape[1]} dims, encoder expects {p.w_r.shape[1]}")
    injected = matmul(Tensor(q.global_feature), p.w_g)
    hidden = regions + injected
    if use_self_attention:
        hidden = region_self_atten(regions, q.boxes, p.w_r) + hidden
    return layer_norm(hidden, p.ln_gain, p.ln_bias)
