"""Shared fixtures: a micro model config, hand-built samples and a tiny corpus config."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from config import BenchConfig, SailConfig  # noqa: E402
from model.region_encoder import ImageQuery  # noqa: E402
from runtime.data import VideoSample  # noqa: E402


def make_sample(rng: np.random.Generator, n: int = 6, m: int = 3, d: int = 8, s: int = 2, e: int = 4,
                sample_id: str = "s0", marker: float = 0.0) -> VideoSample:
    """Random frames and query; with marker > 0 the target frames carry a shared offset."""
    frames = rng.standard_normal((n, d))
    frames[s - 1:e, 0] += marker
    sizes = rng.uniform(0.1, 0.5, size=(m, 2))
    boxes = np.concatenate([rng.uniform(0.3, 0.7, size=(m, 2)), sizes], axis=1)
    query = ImageQuery(regions=rng.standard_normal((m, d)), boxes=boxes, global_feature=rng.standard_normal(d))
    return VideoSample(sample_id=sample_id, frames=frames, s=s, e=e, query=query)


@pytest.fixture
def micro_cfg() -> SailConfig:
    return SailConfig(d_f=8, d_r=8, d_g=8, d_model=8, heads=2, layers=1, window=2, d_ff=32,
                      seed=7, batch=4, epochs=2)


@pytest.fixture
def micro_sample() -> VideoSample:
    return make_sample(np.random.default_rng(11))


@pytest.fixture
def marked_samples():
    """32 samples whose targets are visible in the first frame dimension."""
    rng = np.random.default_rng(3)
    samples = []
    for k in range(32):
        s = int(rng.integers(1, 5))
        e = int(rng.integers(s, 7))
        samples.append(make_sample(rng, s=s, e=e, sample_id=f"m{k}", marker=3.0))
    return samples


@pytest.fixture
def tiny_bench() -> BenchConfig:
    return BenchConfig(
        n_classes=20,
        videos_per_class=3,
        n_min=20,
        n_max=40,
        d_f=8,
        d_sig=4,
        m_min=3,
        m_max=5,
        prototypes_per_class=3,
        min_len=3,
        max_len=40,
        clutter_regions=1,
    )
