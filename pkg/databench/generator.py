# Planted-Activity Corpus Generator
#
# Purpose: synthetic untrimmed videos with planted activity segments.
# - Classes come in sibling pairs under shared parents; a sibling's signature
#   is its parent's signature plus a bounded offset
# - Target frames are W_v u_c plus noise; background frames are noise plus
#   short distractor spans of unrelated classes
# - Region prototypes live in the same feature space as frames, so a query
#   built from a class's prototypes resembles that class's target frames

from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np

from config import BenchConfig
from errors import ConfigError
from logging_config import get_logger
from numeric.rng import STREAM_DATA, RngState

logger = get_logger("Generator")


@dataclass
class ActivityClass:
    class_id: int
    parent_id: int
    signature: np.ndarray  # (d_sig,), unit norm
    prototypes: np.ndarray  # (P, d_f)

    @property
    def sibling_id(self) -> int:
        return self.class_id ^ 1


@dataclass(frozen=True)
class RawSegment:
    label: int
    s: int  # 1-based inclusive
    e: int


@dataclass
class RawVideo:
    video_id: str
    class_id: int
    frames: np.ndarray  # (n, d_f)
    segments: List[RawSegment] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.frames.shape[0]


@dataclass
class RawCorpus:
    classes: List[ActivityClass]
    videos: List[RawVideo]
    mixing: np.ndarray  # W_v, (d_sig, d_f)

    def class_by_id(self) -> Dict[int, ActivityClass]:
        return {c.class_id: c for c in self.classes}


def check_split_arithmetic(cfg: BenchConfig) -> int:
    """Parent count, which must split into whole parts of cfg.split_ratios."""
    if cfg.n_classes % 2 != 0:
        raise ConfigError(f"n_classes={cfg.n_classes} must be even (classes come in sibling pairs)")
    parents = cfg.n_classes // 2
    total = sum(cfg.split_ratios)
    if total <= 0 or min(cfg.split_ratios) <= 0 or parents % total != 0:
        raise ConfigError(
            f"{parents} parent classes cannot be split {':'.join(map(str, cfg.split_ratios))}; "
            f"n_classes must be a multiple of {2 * total}"
        )
    return parents


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def build_classes(cfg: BenchConfig, rng: np.random.Generator, mixing: np.ndarray) -> List[ActivityClass]:
    classes: List[ActivityClass] = []
    for parent in range(cfg.n_classes // 2):
        base = _unit(rng.standard_normal(cfg.d_sig))
        for child in range(2):
            offset = rng.standard_normal(cfg.d_sig) / np.sqrt(cfg.d_sig)
            signature = _unit(base + cfg.sibling_spread * offset)
            spread = cfg.prototype_spread * rng.standard_normal((cfg.prototypes_per_class, cfg.d_f))
            classes.append(ActivityClass(
                class_id=2 * parent + child,
                parent_id=parent,
                signature=signature,
                prototypes=signature @ mixing + spread,
            ))
    return classes


def _draw_length(cfg: BenchConfig, n: int, rng: np.random.Generator) -> int:
    ratio = rng.uniform(cfg.target_ratio - cfg.ratio_spread, cfg.target_ratio + cfg.ratio_spread)
    return int(min(max(1, round(ratio * n)), n))


def plan_segments(cfg: BenchConfig, n: int, label: int, rng: np.random.Generator) -> List[RawSegment]:
    """Primary segment, plus optionally an overlapping and a disjoint segment of the same label."""
    length = _draw_length(cfg, n, rng)
    s = int(rng.integers(1, n - length + 2))
    segments = [RawSegment(label, s, s + length - 1)]

    if rng.random() < cfg.multi_segment_prob:
        s2 = int(rng.integers(s, s + length))
        e2 = min(n, s2 + max(1, int(rng.uniform(0.5, 1.0) * length)) - 1)
        segments.append(RawSegment(label, s2, e2))

    if rng.random() < cfg.disjoint_segment_prob:
        covered_s = min(seg.s for seg in segments)
        covered_e = max(seg.e for seg in segments)
        # leave a gap of at least one frame so the two never touch
        before = (1, covered_s - 2)
        after = (covered_e + 2, n)
        lo, hi = max((before, after), key=lambda span: span[1] - span[0])
        if hi >= lo:
            extra = min(hi - lo + 1, max(1, length // 2))
            s3 = int(rng.integers(lo, hi - extra + 2))
            segments.append(RawSegment(label, s3, s3 + extra - 1))
    return segments


def render_frames(
    cfg: BenchConfig,
    n: int,
    segments: List[RawSegment],
    classes: List[ActivityClass],
    mixing: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    frames = cfg.noise * rng.standard_normal((n, cfg.d_f))
    inside = np.zeros(n, dtype=bool)
    for seg in segments:
        inside[seg.s - 1:seg.e] = True
    label = segments[0].label
    parent = classes[label].parent_id

    # distractor spans drawn only over background frames, from classes of other parents
    outside = np.flatnonzero(~inside)
    foreign = [c for c in classes if c.parent_id != parent]
    if outside.size and foreign and cfg.distractor > 0:
        for _ in range(int(rng.integers(1, 3))):
            other = foreign[int(rng.integers(len(foreign)))]
            start = int(outside[rng.integers(outside.size)])
            stop = min(n, start + int(rng.integers(2, max(3, n // 6))))
            span = np.arange(start, stop)
            span = span[~inside[span]]
            frames[span] += cfg.distractor * (other.signature @ mixing)

    frames[inside] += classes[label].signature @ mixing
    return frames


def generate_video(cfg: BenchConfig, index: int, label: int, classes: List[ActivityClass],
                   mixing: np.ndarray, rng: np.random.Generator) -> RawVideo:
    n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
    segments = plan_segments(cfg, n, label, rng)
    frames = render_frames(cfg, n, segments, classes, mixing, rng)
    return RawVideo(video_id=f"v{index:05d}", class_id=label, frames=frames, segments=segments)


def generate_raw_corpus(
    cfg: BenchConfig,
    seed: int,
    map_fn: Callable = map,
) -> RawCorpus:
    """
    Classes, mixing matrix and videos_per_class videos per class.

    Every video draws from its own generator derived from (seed, video index),
    so `map_fn` may be a thread pool's map without changing the result.
    """
    check_split_arithmetic(cfg)
    state = RngState(seed)
    class_rng = state.stream(STREAM_DATA, 0)
    mixing = class_rng.standard_normal((cfg.d_sig, cfg.d_f))  # unit signatures map to unit-variance frame dims
    classes = build_classes(cfg, class_rng, mixing)

    labels = [c.class_id for c in classes for _ in range(cfg.videos_per_class)]

    def make(index: int) -> RawVideo:
        return generate_video(cfg, index, labels[index], classes, mixing, state.stream(STREAM_DATA, 1, index))

    videos = list(map_fn(make, range(len(labels))))
    logger.info(f"generated {len(videos)} raw videos over {len(classes)} classes")
    return RawCorpus(classes=classes, videos=videos, mixing=mixing)


def create_generate_node(cfg: BenchConfig):
    """
    Creates the first benchmark node:
    reads `seed` from state, writes the raw corpus (classes, mixing matrix, videos).
    """

    def generate_node(state):
        return {"corpus": generate_raw_corpus(cfg, state["seed"])}

    return generate_node
