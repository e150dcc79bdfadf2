# Attention Primitives
#
# Purpose: scaled dot-product attention, multi-head attention, windowed local
# multi-head self-attention and additive attention.
# Layout: sequences are row-per-position, i.e. (n, d); head-stacked weights are (H, d_in, d_head).

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from errors import EmptyInputError, ShapeError
from numeric.params import ParamStore, init_weight
from numeric.tensor import Tensor, matmul, reshape, softmax, tanh, transpose


@dataclass
class MultiHeadParams:
    """Per-head projections W_i^q, W_i^k, W_i^v stacked on axis 0, plus the output projection W^o."""
    wq: Tensor  # (H, d_q, d1)
    wk: Tensor  # (H, d_k, d1)
    wv: Tensor  # (H, d_v, d2)
    wo: Tensor  # (H * d2, d_out)

    @property
    def heads(self) -> int:
        return self.wq.shape[0]

    @property
    def d_out(self) -> int:
        return self.wo.shape[1]

    def validate(self) -> None:
        h, _, d1 = self.wq.shape
        if self.wk.shape[0] != h or self.wv.shape[0] != h:
            raise ShapeError("multi_head", "projections disagree on the head count")
        if self.wk.shape[2] != d1:
            raise ShapeError("multi_head", f"query/key head dims differ: {d1} vs {self.wk.shape[2]}")
        if self.wo.shape[0] != h * self.wv.shape[2]:
            raise ShapeError("multi_head", f"W^o expects {self.wo.shape[0]} inputs, heads give {h * self.wv.shape[2]}")


@dataclass
class AdditiveParams:
    """score(query, key) = w_a . tanh(W1 query + W2 key)"""
    w1: Tensor  # (d_q, d_a)
    w2: Tensor  # (d_k, d_a)
    wa: Tensor  # (d_a,)


def init_multi_head(
    store: ParamStore,
    rng: np.random.Generator,
    prefix: str,
    d_q: int,
    d_k: int,
    d_v: int,
    d_out: int,
    heads: int,
    d_model: int,
) -> MultiHeadParams:
    d_head = d_model // heads
    return MultiHeadParams(
        wq=init_weight(store, rng, f"{prefix}.wq", (heads, d_q, d_head)),
        wk=init_weight(store, rng, f"{prefix}.wk", (heads, d_k, d_head)),
        wv=init_weight(store, rng, f"{prefix}.wv", (heads, d_v, d_head)),
        wo=init_weight(store, rng, f"{prefix}.wo", (heads * d_head, d_out)),
    )


def init_additive(store: ParamStore, rng: np.random.Generator, prefix: str,
                  d_q: int, d_k: int, d_a: int) -> AdditiveParams:
    return AdditiveParams(
        w1=init_weight(store, rng, f"{prefix}.w1", (d_q, d_a)),
        w2=init_weight(store, rng, f"{prefix}.w2", (d_k, d_a)),
        wa=init_weight(store, rng, f"{prefix}.wa", (d_a,)),
    )


def band_mask(n: int, w: int) -> np.ndarray:
    """True where |i - j| <= w; windows are clipped at the sequence ends."""
    idx = np.arange(n)
    return np.abs(idx[:, None] - idx[None, :]) <= w


def dot_atten(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    mask: Optional[np.ndarray] = None,
) -> Tuple[Tensor, Tensor]:
    """
    Softmax(q k^T / sqrt(d1)) v with a row-wise softmax.

    Shapes (leading batch axes allowed): q (n1, d1), k (n2, d1), v (n2, d2).

    Returns:
        (output (n1, d2), attention weights (n1, n2))
    """
    if k.shape[-2] == 0:
        raise EmptyInputError("dot_atten: no keys")
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError("dot_atten", f"query dim {q.shape[-1]} != key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError("dot_atten", f"{k.shape[-2]} keys but {v.shape[-2]} values")
    scores = matmul(q, k.T) * (1.0 / np.sqrt(q.shape[-1]))
    weights = softmax(scores, axis=-1, mask=mask)
    return matmul(weights, v), weights


def multi_head(
    queries: Tensor,
    keys: Tensor,
    values: Tensor,
    p: MultiHeadParams,
    mask: Optional[np.ndarray] = None,
    return_weights: bool = False,
):
    """
    W^o Concat(head_1..head_H) per query position, head_i = DotAtten(Q W_i^q, K W_i^k, V W_i^v).

    Returns (n1, d_out), or ((n1, d_out), weights (H, n1, n2)) with return_weights.
    """
    p.validate()
    if queries.ndim != 2 or keys.ndim != 2 or values.ndim != 2:
        raise ShapeError("multi_head", "queries, keys and values must be rank 2")
    if queries.shape[1] != p.wq.shape[1]:
        raise ShapeError("multi_head", f"query dim {queries.shape[1]} != W^q input {p.wq.shape[1]}")
    if keys.shape[1] != p.wk.shape[1]:
        raise ShapeError("multi_head", f"key dim {keys.shape[1]} != W^k input {p.wk.shape[1]}")
    if values.shape[1] != p.wv.shape[1]:
        raise ShapeError("multi_head", f"value dim {values.shape[1]} != W^v input {p.wv.shape[1]}")

    n1 = queries.shape[0]
    heads, weights = dot_atten(matmul(queries, p.wq), matmul(keys, p.wk), matmul(values, p.wv), mask)
    merged = reshape(transpose(heads, (1, 0, 2)), (n1, p.wo.shape[0]))
    out = matmul(merged, p.wo)
    return (out, weights) if return_weights else out


def local_multi_head(frames: Tensor, w: int, p: MultiHeadParams) -> Tensor:
    """
    Multi-head self-attention where position i only sees frames i-w .. i+w.

    With w >= n - 1 no position is masked and the call is exactly multi_head(F, F, F).
    """
    if w < 0:
        raise ValueError(f"window radius must be non-negative, got {w}")
    n = frames.shape[0]
    if n == 0:
        raise EmptyInputError("local_multi_head: empty sequence")
    mask = None if w >= n - 1 else band_mask(n, w)
    return multi_head(frames, frames, frames, p, mask=mask)


def additive_atten(query: Tensor, keys: Tensor, p: AdditiveParams) -> Tuple[Tensor, Tensor]:
    """
    Additive attention of one query over T keys.

    Returns:
        (context = sum_t weight_t key_t, weights (T,))
    """
    if keys.ndim != 2 or keys.shape[0] == 0:
        raise EmptyInputError("additive_atten: no keys")
    scores = matmul(tanh(matmul(query, p.w1) + matmul(keys, p.w2)), p.wa)
    weights = softmax(scores, axis=-1)
    return matmul(weights, keys), weights


def additive_scores(queries: Tensor, keys: Tensor, p: AdditiveParams) -> Tensor:
    """scores[i, t] = w_a . tanh(W1 q_i + W2 k_t), shape (n_q, n_k)."""
    a = matmul(queries, p.w1)
    b = matmul(keys, p.w2)
    d_a = a.shape[1]
    hidden = tanh(reshape(a, (a.shape[0], 1, d_a)) + reshape(b, (1, b.shape[0], d_a)))
    return matmul(hidden, p.wa)
