# Baselines
#
# Purpose: reference points for the localizer.
# 1. Random: pick s uniformly, then e uniformly in [s, n].
# 2. FLP (frame-level prediction): an MLP scores every frame's probability of
#    lying inside the target; a segment (i, j) scores the probability that
#    exactly frames i..j are inside, and the best-scoring segment is returned.

from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from config import SailConfig
from errors import EmptyInputError, NonFiniteError
from logging_config import get_logger
from numeric.optim import Adam
from numeric.params import ParamStore, init_weight, init_zeros
from numeric.rng import STREAM_BASELINE, RngState
from numeric.tensor import Tensor, backward, concat, matmul, mean, reshape, softplus, tanh
from evaluation.metrics import EvalReport, evaluate, iou_arrays
from runtime.data import VideoSample, fit_sample, iterate_batches

logger = get_logger("FLP")

# Frame probabilities are clipped here before taking logs
PROB_CLIP = 1e-300


def _difficulties(dataset: Sequence[VideoSample]) -> List[str]:
    return [sample.difficulty for sample in dataset]


def draw_random_segment(n: int, rng: np.random.Generator) -> Tuple[int, int]:
    s = int(rng.integers(1, n + 1))
    e = int(rng.integers(s, n + 1))
    return s, e


def random_baseline(dataset: Sequence[VideoSample], seed: int) -> EvalReport:
    """One random segment per sample, drawn from the seed's baseline stream, then evaluated."""
    if not dataset:
        raise EmptyInputError("random_baseline: empty dataset")
    rng = RngState(seed).stream(STREAM_BASELINE)
    preds = [draw_random_segment(sample.n, rng) for sample in dataset]
    gts = [(sample.s, sample.e) for sample in dataset]
    return evaluate(preds, gts, difficulties=_difficulties(dataset))


class RandomBaselineEstimate(BaseModel):
    """Monte-Carlo estimate of the random baseline's expected mIoU"""
    miou: float
    standard_error: float  # of the estimate above
    single_run_sigma: float  # std of the mIoU of one random_baseline call
    draws: int


def random_baseline_expectation(dataset: Sequence[VideoSample], draws: int = 10000,
                                seed: int = 0) -> RandomBaselineEstimate:
    """
    Estimate E[mIoU] of random_baseline with `draws` segments per sample.

    single_run_sigma = sqrt(sum_i Var[IoU_i]) / N is the spread a single-seed
    report is expected to show around the mean.
    """
    if not dataset or draws < 2:
        raise EmptyInputError("random_baseline_expectation needs samples and at least two draws")
    rng = RngState(seed).stream(STREAM_BASELINE, draws)
    means = np.empty(len(dataset))
    variances = np.empty(len(dataset))
    for k, sample in enumerate(dataset):
        s = rng.integers(1, sample.n + 1, size=draws)
        e = rng.integers(s, sample.n + 1)
        ious = iou_arrays(s, e, np.full(draws, sample.s), np.full(draws, sample.e))
        means[k] = ious.mean()
        variances[k] = ious.var(ddof=1)
    n = len(dataset)
    return RandomBaselineEstimate(
        miou=float(means.mean()),
        standard_error=float(np.sqrt(variances.sum() / draws) / n),
        single_run_sigma=float(np.sqrt(variances.sum()) / n),
        draws=draws,
    )


# ----------------------------------------------------------------------
# Segment scoring from frame probabilities
# ----------------------------------------------------------------------

def segment_scores(p: np.ndarray) -> np.ndarray:
    """
    Direct products: scores[i, j] = prod_{k<i}(1-p_k) prod_{i<=k<=j} p_k prod_{k>j}(1-p_k).

    Entries with i > j are 0. O(n^3); used as the reference for segment_log_scores.
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    scores = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            inside = np.zeros(n, dtype=bool)
            inside[i:j + 1] = True
            scores[i, j] = np.prod(np.where(inside, p, 1.0 - p))
    return scores


def segment_log_scores(p: np.ndarray) -> np.ndarray:
    """log segment_scores via prefix sums, O(n^2); entries with i > j are -inf."""
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    log_in = np.log(np.clip(p, PROB_CLIP, 1.0))
    log_out = np.log(np.clip(1.0 - p, PROB_CLIP, 1.0))
    c_in = np.concatenate([[0.0], np.cumsum(log_in)])
    c_out = np.concatenate([[0.0], np.cumsum(log_out)])
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    scores = c_out[i] + (c_in[j + 1] - c_in[i]) + (c_out[n] - c_out[j + 1])
    return np.where(i <= j, scores, -np.inf)


def best_segment(p: np.ndarray) -> Tuple[int, int]:
    """1-based (s, e) maximizing the segment score; ties go to the first pair in row-major order."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise EmptyInputError("best_segment: need a non-empty probability vector")
    i, j = np.unravel_index(int(np.argmax(segment_log_scores(p))), (p.size, p.size))
    return int(i) + 1, int(j) + 1


# ----------------------------------------------------------------------
# Frame-level scorer
# ----------------------------------------------------------------------

class FrameLevelBaseline:
    """
    p_i = sigmoid(w2 . tanh(W1 [v_i; W_g f^g] + b1) + b2)

    Trained with per-frame binary cross-entropy against the inside-target indicator.
    """

    def __init__(self, cfg: SailConfig):
        self.cfg = cfg
        self.params = ParamStore()
        rng = RngState(cfg.seed).stream(STREAM_BASELINE, 1)
        self.w_g = init_weight(self.params, rng, "flp.w_g", (cfg.d_g, cfg.d_f))
        self.w1 = init_weight(self.params, rng, "flp.w1", (2 * cfg.d_f, cfg.flp_hidden))
        self.b1 = init_zeros(self.params, "flp.b1", (cfg.flp_hidden,))
        self.w2 = init_weight(self.params, rng, "flp.w2", (cfg.flp_hidden,))
        self.b2 = init_zeros(self.params, "flp.b2", (1,))

    def logits(self, sample: VideoSample) -> Tensor:
        n = sample.n
        query = matmul(Tensor(sample.query.global_feature), self.w_g)
        inputs = concat([Tensor(sample.frames), reshape(query, (1, self.cfg.d_f)) * Tensor(np.ones((n, 1)))], axis=-1)
        return matmul(tanh(matmul(inputs, self.w1) + self.b1), self.w2) + self.b2

    def frame_loss(self, sample: VideoSample) -> Tensor:
        """Mean per-frame BCE: softplus(z) - y z."""
        z = self.logits(sample)
        y = np.zeros(sample.n)
        y[sample.s - 1:sample.e] = 1.0
        return mean(softplus(z) - z * y)

    def frame_probabilities(self, sample: VideoSample) -> np.ndarray:
        z = self.logits(sample).data
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def fit(self, train: Sequence[VideoSample]) -> List[float]:
        """Adam over shuffled mini-batches; returns the mean loss per epoch."""
        if not train:
            raise EmptyInputError("FLP baseline needs training samples")
        cfg = self.cfg
        samples = [fit_sample(s, cfg.n_max) for s in train]
        optimizer = Adam(self.params, lr=cfg.flp_lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
        shuffle = RngState(cfg.seed).stream(STREAM_BASELINE, 2)
        history: List[float] = []
        for epoch in range(1, cfg.flp_epochs + 1):
            total = 0.0
            for batch in iterate_batches(samples, cfg.batch, shuffle):
                for sample in batch:
                    loss = self.frame_loss(sample)
                    if not np.isfinite(loss.item()):
                        raise NonFiniteError(f"FLP loss became {loss.item()} in epoch {epoch}")
                    self.params.accumulate(backward(loss), scale=1.0 / len(batch))
                    total += loss.item()
                optimizer.step()
            history.append(total / len(samples))
            logger.info(f"epoch {epoch}/{cfg.flp_epochs} loss={history[-1]:.4f}")
        return history

    def predict(self, sample: VideoSample) -> Tuple[int, int]:
        return best_segment(self.frame_probabilities(fit_sample(sample, self.cfg.n_max)))


def flp_baseline(train: Sequence[VideoSample], test: Sequence[VideoSample], cfg: SailConfig,
                 model: Optional[FrameLevelBaseline] = None) -> EvalReport:
    """Train the frame-level scorer on `train` (unless given) and evaluate it on `test`."""
    if not test:
        raise EmptyInputError("flp_baseline: empty test set")
    if model is None:
        model = FrameLevelBaseline(cfg)
        model.fit(train)
    fitted = [fit_sample(s, cfg.n_max) for s in test]
    preds = [model.predict(s) for s in fitted]
    gts = [(s.s, s.e) for s in fitted]
    return evaluate(preds, gts, difficulties=_difficulties(fitted))
