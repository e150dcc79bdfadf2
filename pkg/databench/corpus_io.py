"""
Corpus files: one JSON object per line per sample, plus a JSON manifest.

Record fields: id, split, class, query_class, difficulty, n, frames (n x d_f),
regions (m x d_r), boxes (m x 4), global, s, e. Floats are rounded to a fixed
number of decimals and keys are sorted, so equal corpora give equal bytes.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import numpy as np

from errors import DataError
from model.region_encoder import ImageQuery
from runtime.data import VideoSample
from databench.splits import CorpusManifest

MANIFEST_FILE = "manifest.json"


def corpus_file(out_dir: Union[str, Path], split: str) -> Path:
    return Path(out_dir) / f"{split}.jsonl"


def _rounded(array: np.ndarray, decimals: int) -> list:
    # + 0.0 folds -0.0 into 0.0
    return (np.round(np.asarray(array, dtype=np.float64), decimals) + 0.0).tolist()


def sample_record(sample: VideoSample, decimals: int = 6) -> Dict[str, Any]:
    return {
        "id": sample.sample_id,
        "split": sample.split,
        "class": sample.class_id,
        "query_class": sample.query_class,
        "difficulty": sample.difficulty,
        "n": sample.n,
        "frames": _rounded(sample.frames, decimals),
        "regions": _rounded(sample.query.regions, decimals),
        "boxes": _rounded(sample.query.boxes, decimals),
        "global": _rounded(sample.query.global_feature, decimals),
        "s": sample.s,
        "e": sample.e,
    }


def sample_from_record(record: Dict[str, Any]) -> VideoSample:
    try:
        frames = np.asarray(record["frames"], dtype=np.float64)
        if frames.shape[0] != record["n"]:
            raise DataError(f"{record['id']}: n={record['n']} but {frames.shape[0]} frames")
        return VideoSample(
            sample_id=record["id"],
            frames=frames,
            s=int(record["s"]),
            e=int(record["e"]),
            query=ImageQuery(regions=record["regions"], boxes=record["boxes"], global_feature=record["global"]),
            class_id=int(record["class"]),
            query_class=int(record.get("query_class", -1)),
            difficulty=record["difficulty"],
            split=record.get("split", ""),
        )
    except KeyError as e:
        raise DataError(f"corpus record is missing field {e}") from e


def write_corpus(path: Union[str, Path], samples: Sequence[VideoSample], decimals: int = 6) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sample in samples:
            f.write(json.dumps(sample_record(sample, decimals), sort_keys=True) + "\n")
    return path


def read_corpus(path: Union[str, Path]) -> List[VideoSample]:
    """Raises FileNotFoundError for a missing file and DataError for malformed lines."""
    samples: List[VideoSample] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{line_no}: not valid JSON ({e})") from e
            samples.append(sample_from_record(record))
    return samples


def write_manifest(out_dir: Union[str, Path], manifest: CorpusManifest) -> Path:
    path = Path(out_dir) / MANIFEST_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(out_dir: Union[str, Path]) -> CorpusManifest:
    return CorpusManifest.model_validate_json((Path(out_dir) / MANIFEST_FILE).read_text(encoding="utf-8"))
