from typing import List, TypedDict

from databench.curation import CuratedVideo
from databench.generator import RawCorpus
from databench.splits import CorpusManifest
from runtime.data import VideoSample


# The benchmark pipeline is a straight line of nodes; each one reads what the
# previous nodes wrote and adds its own keys. Nothing is ever overwritten.

class BenchState(TypedDict, total=False):
    """State flowing through the benchmark graph"""

    #input
    seed: int

    #generate
    corpus: RawCorpus

    #curate
    curated: List[CuratedVideo]

    #queries
    samples: List[VideoSample]
    skipped_videos: int

    #split
    train: List[VideoSample]
    valid: List[VideoSample]
    test: List[VideoSample]
    manifest: CorpusManifest
