# Order-Sensitive Localizer
#
# Purpose: bi-directional additive aggregation over encoded frames, start/end
# softmax heads, argmax decoding and the negative log-likelihood loss.
# Boundary indices are 1-based and inclusive everywhere outside this module's internals.

from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from errors import DataError, ShapeError
from numeric.params import ParamStore, init_weight, init_zeros
from numeric.tensor import Tensor, matmul, safe_log, softmax, tanh
from model.attention import AdditiveParams, additive_scores, init_additive

DecodeMode = Literal["independent", "constrained"]


@dataclass
class BoundaryHead:
    """logits = w . tanh(W h + b)"""
    w: Tensor  # (d_f, d_a)
    b: Tensor  # (d_a,)
    v: Tensor  # (d_a,)


@dataclass
class LocalizerParams:
    forward: AdditiveParams
    backward: AdditiveParams
    start: BoundaryHead
    end: BoundaryHead


@dataclass
class BoundaryPrediction:
    p_s: np.ndarray
    p_e: np.ndarray
    s: int  # 1-based
    e: int  # 1-based
    cross_attention: Optional[np.ndarray] = None  # (n, m) head-averaged, last layer


def init_localizer(store: ParamStore, rng: np.random.Generator, d_f: int, d_a: int) -> LocalizerParams:
    return LocalizerParams(
        forward=init_additive(store, rng, "localizer.fw", d_f, d_f, d_a),
        backward=init_additive(store, rng, "localizer.bw", d_f, d_f, d_a),
        start=BoundaryHead(
            w=init_weight(store, rng, "localizer.start.w", (d_f, d_a)),
            b=init_zeros(store, "localizer.start.b", (d_a,)),
            v=init_weight(store, rng, "localizer.start.v", (d_a,)),
        ),
        end=BoundaryHead(
            w=init_weight(store, rng, "localizer.end.w", (d_f, d_a)),
            b=init_zeros(store, "localizer.end.b", (d_a,)),
            v=init_weight(store, rng, "localizer.end.v", (d_a,)),
        ),
    )


def _aggregate(frames: Tensor, p: AdditiveParams, mask: np.ndarray) -> Tensor:
    weights = softmax(additive_scores(frames, frames, p), axis=-1, mask=mask)
    return matmul(weights, frames)


def forward_context(frames: Tensor, p: AdditiveParams) -> Tensor:
    """h^fw_i = sum_{t >= i} alpha_it h^v_t with alpha from additive attention restricted to t in [i, n]."""
    n = frames.shape[0]
    return _aggregate(frames, p, np.triu(np.ones((n, n), dtype=bool)))


def backward_context(frames: Tensor, p: AdditiveParams) -> Tensor:
    """h^bw_i = sum_{t <= i} alpha_it h^v_t; mirror of forward_context."""
    n = frames.shape[0]
    return _aggregate(frames, p, np.tril(np.ones((n, n), dtype=bool)))


def boundary_logits(contexts: Tensor, head: BoundaryHead) -> Tensor:
    return matmul(tanh(matmul(contexts, head.w) + head.b), head.v)


def boundary_distributions(fw: Tensor, bw: Tensor, p: LocalizerParams) -> Tuple[Tensor, Tensor]:
    """Start distribution from forward contexts, end distribution from backward contexts."""
    if fw.shape != bw.shape:
        raise ShapeError("boundary_distributions", f"forward {fw.shape} and backward {bw.shape} contexts differ")
    p_s = softmax(boundary_logits(fw, p.start), axis=-1)
    p_e = softmax(boundary_logits(bw, p.end), axis=-1)
    return p_s, p_e


def localize(frames: Tensor, p: LocalizerParams, bidirectional: bool = True) -> Tuple[Tensor, Tensor]:
    """Distributions from encoded frames; bidirectional=False is the ablation w/o BA."""
    if bidirectional:
        return boundary_distributions(forward_context(frames, p.forward), backward_context(frames, p.backward), p)
    return boundary_distributions(frames, frames, p)


def predict_boundaries(p_s: np.ndarray, p_e: np.ndarray, mode: DecodeMode = "independent") -> Tuple[int, int]:
    """
    Decode (s, e), 1-based.

    independent: per-distribution argmax, ties to the smallest index.
    constrained: argmax over pairs i <= j of p_s[i] * p_e[j]; among tied pairs the
        one with the larger start probability wins, then the smallest (i, j).
    """
    p_s = np.asarray(p_s, dtype=np.float64)
    p_e = np.asarray(p_e, dtype=np.float64)
    if p_s.shape != p_e.shape or p_s.ndim != 1 or p_s.size == 0:
        raise ShapeError("predict_boundaries", f"distributions of shapes {p_s.shape} and {p_e.shape}")
    if mode == "independent":
        return int(np.argmax(p_s)) + 1, int(np.argmax(p_e)) + 1
    if mode == "constrained":
        joint = np.triu(np.outer(p_s, p_e))
        n = p_s.size
        joint[np.tril_indices(n, k=-1)] = -np.inf
        rows, cols = np.nonzero(joint == joint.max())
        best = int(np.argmax(p_s[rows]))  # rows are sorted, so argmax keeps the smallest pair
        return int(rows[best]) + 1, int(cols[best]) + 1
    raise ValueError(f"unknown decode mode '{mode}'")


def sample_nll(p_s: Tensor, p_e: Tensor, s: int, e: int) -> Tensor:
    """-(log p_s[s] + log p_e[e]) for one sample, probabilities clamped at 1e-12."""
    n = p_s.shape[0]
    if not (1 <= s <= n and 1 <= e <= n):
        raise DataError(f"ground truth ({s}, {e}) outside 1..{n}")
    return -(safe_log(p_s[s - 1]) + safe_log(p_e[e - 1]))


def nll_loss(batch: Sequence[Tuple[Tensor, Tensor, Tuple[int, int]]]) -> Tensor:
    """Mean of sample_nll over the batch."""
    if not batch:
        raise DataError("nll_loss over an empty batch")
    losses: List[Tensor] = [sample_nll(p_s, p_e, s, e) for p_s, p_e, (s, e) in batch]
    total = losses[0]
    for loss in losses[1:]:
        total = total + loss
    return total * (1.0 / len(losses))
