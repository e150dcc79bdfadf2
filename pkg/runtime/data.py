"""Training samples, length fitting and batching."""

from dataclasses import dataclass, replace
from typing import Iterator, List, Literal, Optional, Sequence

import numpy as np

from errors import DataError
from model.region_encoder import ImageQuery

Difficulty = Literal["simple", "difficult"]


@dataclass
class VideoSample:
    """n frame vectors, one target segment (1-based inclusive) and its paired image query."""
    sample_id: str
    frames: np.ndarray  # (n, d_f)
    s: int
    e: int
    query: ImageQuery
    class_id: int = -1
    query_class: int = -1
    difficulty: Difficulty = "simple"
    split: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise DataError(f"{self.sample_id}: frames must be (n, d_f) with n >= 1, got {self.frames.shape}")
        if not (1 <= self.s <= self.e <= self.n):
            raise DataError(f"{self.sample_id}: target ({self.s}, {self.e}) violates 1 <= s <= e <= {self.n}")

    @property
    def n(self) -> int:
        return self.frames.shape[0]


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def remap_index(index: int, n: int, n_max: int) -> int:
    """s' = round(s * n_max / n) clipped to [1, n_max]."""
    return min(max(_round_half_up(index * n_max / n), 1), n_max)


def downsample_indices(n: int, n_max: int) -> np.ndarray:
    """Uniform striding: n_max frame indices (0-based) spread over n frames."""
    return np.floor(np.arange(n_max) * (n / n_max)).astype(np.int64)


def fit_sample(sample: VideoSample, n_max: int) -> VideoSample:
    """Downsample overlong sequences to n_max frames, remapping the target proportionally."""
    if sample.n <= n_max:
        return sample
    frames = sample.frames[downsample_indices(sample.n, n_max)]
    s = remap_index(sample.s, sample.n, n_max)
    e = remap_index(sample.e, sample.n, n_max)
    return replace(sample, frames=frames, s=s, e=max(s, e))


def iterate_batches(
    samples: Sequence[VideoSample],
    batch_size: int,
    rng: Optional[np.random.Generator] = None,
) -> Iterator[List[VideoSample]]:
    """Mini-batches in a seeded shuffled order (or in order when rng is None)."""
    order = np.arange(len(samples)) if rng is None else rng.permutation(len(samples))
    for start in range(0, len(order), batch_size):
        yield [samples[i] for i in order[start:start + batch_size]]
