"""
Curation of raw videos into single-segment videos.

1. Same-label segments that overlap or touch are merged until none do.
2. Every remaining segment becomes its own video (a copy of the raw frames).
3. Videos whose target is shorter than min_len or longer than max_len are dropped.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from logging_config import get_logger
from databench.generator import RawSegment, RawVideo

logger = get_logger("Curation")


@dataclass
class CuratedVideo:
    video_id: str
    source_id: str  # raw video this copy was cut from
    class_id: int
    frames: np.ndarray
    s: int
    e: int

    @property
    def n(self) -> int:
        return self.frames.shape[0]

    @property
    def target_length(self) -> int:
        return self.e - self.s + 1


def merge_segments(segments: Sequence[RawSegment]) -> List[RawSegment]:
    """
    Fixed point of pairwise merging: no two same-label segments overlap or touch.

    Sorting by start turns the pairwise rule into a single sweep, so the result
    does not depend on the input order. Output is sorted by (label, s).
    """
    by_label: Dict[int, List[RawSegment]] = {}
    for seg in segments:
        by_label.setdefault(seg.label, []).append(seg)

    merged: List[RawSegment] = []
    for label in sorted(by_label):
        ordered = sorted(by_label[label], key=lambda seg: (seg.s, seg.e))
        s, e = ordered[0].s, ordered[0].e
        for seg in ordered[1:]:
            if seg.s <= e + 1:
                e = max(e, seg.e)
            else:
                merged.append(RawSegment(label, s, e))
                s, e = seg.s, seg.e
        merged.append(RawSegment(label, s, e))
    return merged


def curate(raw: Sequence[RawVideo], min_len: int, max_len: int) -> List[CuratedVideo]:
    curated: List[CuratedVideo] = []
    dropped = 0
    for video in raw:
        for k, seg in enumerate(merge_segments(video.segments)):
            length = seg.e - seg.s + 1
            if length < min_len or length > max_len:
                dropped += 1
                continue
            curated.append(CuratedVideo(
                video_id=f"{video.video_id}-{k}",
                source_id=video.video_id,
                class_id=seg.label,
                frames=video.frames.copy(),
                s=seg.s,
                e=seg.e,
            ))
    logger.info(f"{len(curated)} single-segment videos kept, {dropped} dropped outside [{min_len}, {max_len}]")
    return curated


def create_curate_node(min_len: int, max_len: int):
    """Creates the node that turns `corpus` into single-segment `curated` videos."""

    def curate_node(state):
        return {"curated": curate(state["corpus"].videos, min_len, max_len)}

    return curate_node
