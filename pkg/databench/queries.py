"""
Image-query synthesis.

Each curated video yields simple samples (query from its own class, attributed
to another video of that class) and difficult samples (query from the sibling
class under the same parent). A query is a bundle of region vectors drawn
around class prototypes, a few clutter regions from unrelated classes, random
boxes and a global feature near the mean of the chosen prototypes.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np

from config import BenchConfig
from logging_config import get_logger
from model.region_encoder import ImageQuery
from numeric.rng import STREAM_DATA, RngState
from databench.curation import CuratedVideo
from databench.generator import ActivityClass
from runtime.data import VideoSample

logger = get_logger("Queries")


def random_boxes(m: int, rng: np.random.Generator) -> np.ndarray:
    """(m, 4) center/size boxes inside the unit square, sizes strictly positive."""
    sizes = rng.uniform(0.05, 0.5, size=(m, 2))
    centers = rng.uniform(sizes / 2, 1.0 - sizes / 2)
    return np.concatenate([centers, sizes], axis=1)


def synthesize_query(
    cfg: BenchConfig,
    query_class: ActivityClass,
    clutter_pool: Sequence[ActivityClass],
    rng: np.random.Generator,
) -> ImageQuery:
    m = int(rng.integers(cfg.m_min, cfg.m_max + 1))
    clutter = cfg.clutter_regions if clutter_pool else 0
    n_class = m - clutter
    picks = rng.integers(len(query_class.prototypes), size=n_class)
    chosen = query_class.prototypes[picks]
    regions = [chosen + cfg.region_noise * rng.standard_normal(chosen.shape)]
    for _ in range(clutter):
        other = clutter_pool[int(rng.integers(len(clutter_pool)))]
        proto = other.prototypes[int(rng.integers(len(other.prototypes)))]
        regions.append((proto + cfg.region_noise * rng.standard_normal(cfg.d_f))[None, :])
    stacked = np.concatenate(regions, axis=0)
    order = rng.permutation(m)
    global_feature = chosen.mean(axis=0) + cfg.global_noise * rng.standard_normal(cfg.d_f)
    return ImageQuery(regions=stacked[order], boxes=random_boxes(m, rng), global_feature=global_feature)


def make_queries(
    videos: Sequence[CuratedVideo],
    classes: Sequence[ActivityClass],
    cfg: BenchConfig,
    seed: int,
) -> Tuple[List[VideoSample], int]:
    """
    Returns:
        (samples, number of videos skipped because no other video of their class exists)
    """
    by_id = {c.class_id: c for c in classes}
    sources: Dict[int, List[str]] = {}
    for video in videos:
        sources.setdefault(video.class_id, [])
        if video.source_id not in sources[video.class_id]:
            sources[video.class_id].append(video.source_id)

    state = RngState(seed)
    samples: List[VideoSample] = []
    skipped = 0
    for index, video in enumerate(videos):
        own = by_id[video.class_id]
        others = [src for src in sources.get(video.class_id, []) if src != video.source_id]
        if not others:
            skipped += 1
            continue
        rng = state.stream(STREAM_DATA, 2, index)
        clutter_pool = [c for c in classes if c.parent_id != own.parent_id]
        plan = [("simple", own)] * cfg.simple_per_video + [("difficult", by_id[own.sibling_id])] * cfg.difficult_per_video
        for k, (difficulty, query_class) in enumerate(plan):
            samples.append(VideoSample(
                sample_id=f"{video.video_id}-q{k}",
                frames=video.frames,
                s=video.s,
                e=video.e,
                query=synthesize_query(cfg, query_class, clutter_pool, rng),
                class_id=video.class_id,
                query_class=query_class.class_id,
                difficulty=difficulty,
            ))
    if skipped:
        logger.warning(f"skipped {skipped} videos whose class has no other video to draw a query from")
    logger.info(f"{len(samples)} samples from {len(videos) - skipped} videos")
    return samples, skipped


def create_queries_node(cfg: BenchConfig):
    """Creates the node that pairs every curated video with simple and difficult queries."""

    def queries_node(state):
        samples, skipped = make_queries(state["curated"], state["corpus"].classes, cfg, state["seed"])
        return {"samples": samples, "skipped_videos": skipped}

    return queries_node
