"""Temporal IoU, mIoU and IoU@R over inclusive 1-based frame segments."""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from config import IOU_THRESHOLDS
from errors import DataError, EmptyInputError

SegmentLike = Union["Segment", Tuple[int, int]]


@dataclass(frozen=True)
class Segment:
    s: int
    e: int

    @property
    def length(self) -> int:
        """Frame count; a reversed segment (e < s) is empty."""
        return max(0, self.e - self.s + 1)


def _as_segment(value: SegmentLike) -> Segment:
    return value if isinstance(value, Segment) else Segment(int(value[0]), int(value[1]))


def iou(a: SegmentLike, b: SegmentLike) -> float:
    """Intersection over union with inclusive indices; 0 when either side is empty."""
    a, b = _as_segment(a), _as_segment(b)
    if a.length == 0 or b.length == 0:
        return 0.0
    inter = max(0, min(a.e, b.e) - max(a.s, b.s) + 1)
    return inter / (a.length + b.length - inter)


def iou_arrays(s_a: np.ndarray, e_a: np.ndarray, s_b: np.ndarray, e_b: np.ndarray) -> np.ndarray:
    """Element-wise iou over aligned arrays of segment endpoints."""
    len_a = np.maximum(0, e_a - s_a + 1)
    len_b = np.maximum(0, e_b - s_b + 1)
    inter = np.maximum(0, np.minimum(e_a, e_b) - np.maximum(s_a, s_b) + 1)
    inter = np.where((len_a == 0) | (len_b == 0), 0, inter)
    union = len_a + len_b - inter
    return np.where(union > 0, inter / np.maximum(union, 1), 0.0)


def threshold_key(r: float) -> str:
    return f"{r:g}"


class EvalReport(BaseModel):
    """mIoU and IoU@R (fractions in [0, 1]) over a set of samples"""
    miou: float = Field(ge=0.0, le=1.0)
    iou_at: Dict[str, float] = Field(description="Threshold -> fraction of samples with IoU strictly above it")
    count: int
    by_difficulty: Dict[str, "EvalReport"] = Field(default_factory=dict)


EvalReport.model_rebuild()


def _summarize(ious: np.ndarray, thresholds: Sequence[float]) -> EvalReport:
    return EvalReport(
        miou=float(ious.mean()),
        iou_at={threshold_key(r): float((ious > r).mean()) for r in thresholds},
        count=int(ious.size),
    )


def per_sample_iou(preds: Sequence[SegmentLike], gts: Sequence[SegmentLike]) -> np.ndarray:
    if len(preds) != len(gts):
        raise DataError(f"{len(preds)} predictions for {len(gts)} ground-truth segments")
    return np.array([iou(p, g) for p, g in zip(preds, gts)], dtype=np.float64)


def evaluate(
    preds: Sequence[SegmentLike],
    gts: Sequence[SegmentLike],
    thresholds: Sequence[float] = IOU_THRESHOLDS,
    difficulties: Optional[Sequence[str]] = None,
) -> EvalReport:
    """
    Aggregate per-sample IoU into an EvalReport.

    Args:
        preds: predicted (s, e); reversed predictions score 0
        gts: ground-truth (s, e) with s <= e
        thresholds: IoU@R thresholds, compared with strict >
        difficulties: optional per-sample tags; adds one sub-report per tag
    """
    ious = per_sample_iou(preds, gts)
    if ious.size == 0:
        raise EmptyInputError("evaluate: no samples")
    report = _summarize(ious, thresholds)
    if difficulties is not None:
        if len(difficulties) != ious.size:
            raise DataError(f"{len(difficulties)} difficulty tags for {ious.size} samples")
        tags = np.asarray(difficulties)
        for tag in sorted(set(difficulties)):
            report.by_difficulty[tag] = _summarize(ious[tags == tag], thresholds)
    return report

