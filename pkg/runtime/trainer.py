# Training Loop
#
# Mini-batch Adam on the boundary negative log-likelihood.
# - Batches come from a shuffle stream seeded by cfg.seed
# - Per-sample gradients may run on a thread pool; they are reduced in sample order
# - Validation NLL and mIoU after every epoch; the best epoch's parameters are kept

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from config import SailConfig
from errors import EmptyInputError, NonFiniteError
from logging_config import get_logger
from numeric.optim import Adam
from numeric.rng import STREAM_SHUFFLE, RngState
from evaluation.metrics import EvalReport, evaluate
from model.sail import SailModel, create_sail_model
from runtime.data import VideoSample, fit_sample, iterate_batches

logger = get_logger("Trainer")


class EpochRecord(BaseModel):
    epoch: int
    steps: int = Field(description="Optimizer steps taken so far")
    train_loss: float = Field(description="Mean batch loss over the epoch")
    valid_loss: Optional[float] = Field(default=None, description="Mean validation NLL")
    valid_miou: Optional[float] = None
    valid_iou_at: Dict[str, float] = Field(default_factory=dict)
    wall_clock: float = Field(description="Seconds spent in the epoch")


class TrainLog(BaseModel):
    """Per-epoch training history plus the selected epoch"""
    seed: int
    epochs: List[EpochRecord] = Field(default_factory=list)
    best_epoch: Optional[int] = None
    best_valid_miou: Optional[float] = None

    def comparable(self) -> dict:
        """Everything except timings; equal seeds and data give equal values."""
        return self.model_dump(exclude={"epochs": {"__all__": {"wall_clock"}}})

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for record in self.epochs:
            row = record.model_dump(exclude={"valid_iou_at"})
            row.update({f"valid_IoU@{k}": v for k, v in record.valid_iou_at.items()})
            rows.append(row)
        return pd.DataFrame(rows).set_index("epoch") if rows else pd.DataFrame()


def evaluate_model(model: SailModel, samples: Sequence[VideoSample]) -> EvalReport:
    """Decode every sample and score it against its (length-fitted) ground truth."""
    fitted = [fit_sample(s, model.cfg.n_max) for s in samples]
    preds = model.predict(fitted)
    return evaluate(preds, [(s.s, s.e) for s in fitted], difficulties=[s.difficulty for s in fitted])


def validate(model: SailModel, samples: Sequence[VideoSample]) -> Tuple[EvalReport, float]:
    """Validation report and mean NLL, sharing one forward pass per sample."""
    fitted = [fit_sample(s, model.cfg.n_max) for s in samples]
    preds, loss = model.score(fitted)
    report = evaluate(preds, [(s.s, s.e) for s in fitted], difficulties=[s.difficulty for s in fitted])
    return report, loss.item()


def _batch_gradients(
    model: SailModel,
    batch: Sequence[VideoSample],
    executor: Optional[ThreadPoolExecutor],
) -> float:
    """Accumulate the batch-mean gradient into model.params; returns the batch-mean loss."""
    if executor is None:
        results = [model.sample_gradients(sample) for sample in batch]
    else:
        results = list(executor.map(model.sample_gradients, batch))
    scale = 1.0 / len(batch)
    total = 0.0
    for loss, grads in results:
        total += loss
        model.params.accumulate_named(grads, scale=scale)
    return total * scale


def train(
    train_set: Sequence[VideoSample],
    valid_set: Sequence[VideoSample],
    cfg: SailConfig,
    model: Optional[SailModel] = None,
) -> Tuple[SailModel, TrainLog]:
    """
    Train a model and return it with the best-validation parameters loaded.

    Args:
        train_set: non-empty training samples
        valid_set: class-disjoint validation samples; when empty the last epoch is kept
        cfg: model and optimizer settings
        model: optional model to continue from (a fresh one is built from cfg otherwise)

    Raises:
        NonFiniteError: the loss or a parameter stopped being finite
    """
    if not train_set:
        raise EmptyInputError("train: empty training set")
    model = model or create_sail_model(cfg)
    train_set = [fit_sample(s, cfg.n_max) for s in train_set]
    optimizer = Adam(model.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps)
    shuffle = RngState(cfg.seed).stream(STREAM_SHUFFLE)
    log = TrainLog(seed=cfg.seed)

    logger.info(f"{len(train_set)} train / {len(valid_set)} valid samples, "
                f"{model.params.num_parameters()} parameters, threads={cfg.threads}")

    best_state = model.params.state_dict()
    steps = 0
    executor = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            started = time.perf_counter()
            losses: List[float] = []
            for batch in iterate_batches(train_set, cfg.batch, shuffle):
                loss = _batch_gradients(model, batch, executor)
                if not np.isfinite(loss):
                    raise NonFiniteError(f"loss became {loss} at epoch {epoch}, step {steps + 1}")
                optimizer.step()
                steps += 1
                losses.append(loss)
                if cfg.max_steps is not None and steps >= cfg.max_steps:
                    break
            if not model.params.all_finite():
                raise NonFiniteError(f"non-finite parameters after epoch {epoch}")

            record = EpochRecord(epoch=epoch, steps=steps, train_loss=float(np.mean(losses)), wall_clock=0.0)
            if valid_set:
                report, record.valid_loss = validate(model, valid_set)
                record.valid_miou = report.miou
                record.valid_iou_at = report.iou_at
                if log.best_valid_miou is None or report.miou > log.best_valid_miou:
                    log.best_valid_miou = report.miou
                    log.best_epoch = epoch
                    best_state = model.params.state_dict()
            else:
                log.best_epoch = epoch
                best_state = model.params.state_dict()
            record.wall_clock = time.perf_counter() - started
            log.epochs.append(record)

            valid_text = f" valid mIoU={record.valid_miou:.4f}" if record.valid_miou is not None else ""
            logger.info(f"epoch {epoch}/{cfg.epochs} steps={steps} loss={record.train_loss:.4f}{valid_text}")

            if cfg.max_steps is not None and steps >= cfg.max_steps:
                logger.info(f"reached max_steps={cfg.max_steps}")
                break
    finally:
        if executor is not None:
            executor.shutdown()

    model.params.load_state_dict(best_state)
    logger.info(f"kept epoch {log.best_epoch}")
    return model, log
