"""Class-disjoint train/valid/test splits and the corpus manifest."""

from dataclasses import replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from errors import ConfigError
from numeric.rng import STREAM_DATA, RngState
from databench.generator import ActivityClass
from runtime.data import VideoSample

SPLIT_NAMES = ("train", "valid", "test")


class SplitStats(BaseModel):
    samples: int
    simple: int
    difficult: int
    classes: List[int] = Field(default_factory=list)
    mean_video_length: float = Field(description="Mean frame count over samples")
    mean_target_length: float = Field(description="Mean target segment length in frames")


class CorpusManifest(BaseModel):
    """Per-split statistics plus an 'all' row"""
    seed: int
    splits: Dict[str, SplitStats]
    skipped_videos: int = 0


def split_stats(samples: Sequence[VideoSample]) -> SplitStats:
    if not samples:
        return SplitStats(samples=0, simple=0, difficult=0, mean_video_length=0.0, mean_target_length=0.0)
    return SplitStats(
        samples=len(samples),
        simple=sum(1 for s in samples if s.difficulty == "simple"),
        difficult=sum(1 for s in samples if s.difficulty == "difficult"),
        classes=sorted({s.class_id for s in samples}),
        mean_video_length=float(np.mean([s.n for s in samples])),
        mean_target_length=float(np.mean([s.e - s.s + 1 for s in samples])),
    )


def assign_parents(parents: Sequence[int], ratios: Tuple[int, int, int], seed: int) -> Dict[int, str]:
    """Shuffle parent ids and cut them into consecutive blocks proportional to `ratios`."""
    total = sum(ratios)
    if total <= 0 or min(ratios) < 0:
        raise ConfigError(f"invalid split ratios {ratios}")
    order = [parents[i] for i in RngState(seed).stream(STREAM_DATA, 3).permutation(len(parents))]
    n_valid = len(order) * ratios[1] // total
    n_test = len(order) * ratios[2] // total
    n_train = len(order) - n_valid - n_test
    names = ["train"] * n_train + ["valid"] * n_valid + ["test"] * n_test
    return dict(zip(order, names))


def split_by_class(
    samples: Sequence[VideoSample],
    classes: Sequence[ActivityClass],
    ratios: Tuple[int, int, int] = (8, 1, 1),
    seed: int = 0,
    skipped_videos: int = 0,
) -> Tuple[List[VideoSample], List[VideoSample], List[VideoSample], CorpusManifest]:
    """
    Assign whole parent classes (both siblings) to one split each.

    Difficult queries come from the sibling, so no query ever crosses splits.
    """
    parent_of = {c.class_id: c.parent_id for c in classes}
    split_of_parent = assign_parents(sorted(set(parent_of.values())), ratios, seed)
    buckets: Dict[str, List[VideoSample]] = {name: [] for name in SPLIT_NAMES}
    for sample in samples:
        name = split_of_parent[parent_of[sample.class_id]]
        buckets[name].append(replace(sample, split=name))

    stats = {name: split_stats(buckets[name]) for name in SPLIT_NAMES}
    stats["all"] = split_stats([s for name in SPLIT_NAMES for s in buckets[name]])
    manifest = CorpusManifest(seed=seed, splits=stats, skipped_videos=skipped_videos)
    return buckets["train"], buckets["valid"], buckets["test"], manifest


def create_split_node(ratios: Tuple[int, int, int]):
    """Creates the last node: class-disjoint splits plus the manifest."""

    def split_node(state):
        train, valid, test, manifest = split_by_class(
            state["samples"],
            state["corpus"].classes,
            ratios,
            state["seed"],
            state.get("skipped_videos", 0),
        )
        return {"train": train, "valid": valid, "test": test, "manifest": manifest}

    return split_node
