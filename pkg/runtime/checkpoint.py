"""
Binary checkpoints (little-endian).

Layout:
    b"SAILCKPT"                        8 bytes magic
    u32 version
    u64 config length, UTF-8 JSON config
    records: u32 name length, UTF-8 name, u32 rank, u64 dims..., float64 payload
    u32 record count                   footer
"""

import json
import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Union

import numpy as np
from pydantic import ValidationError

from config import SailConfig
from errors import CheckpointError
from numeric.params import ParamStore

MAGIC = b"SAILCKPT"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    version: int
    config: SailConfig
    tensors: "OrderedDict[str, np.ndarray]"


def encode_checkpoint(params: Union[ParamStore, Dict[str, np.ndarray]], cfg: SailConfig) -> bytes:
    tensors = params.state_dict() if isinstance(params, ParamStore) else params
    config_blob = json.dumps(cfg.model_dump(mode="json"), sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<IQ", FORMAT_VERSION, len(config_blob)), config_blob]
    for name, array in tensors.items():
        array = np.asarray(array, dtype="<f8")
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack(f"<I{array.ndim}Q", array.ndim, *array.shape))
        parts.append(array.tobytes(order="C"))
    parts.append(struct.pack("<I", len(tensors)))
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.blob):
            raise CheckpointError(f"truncated checkpoint: wanted {size} bytes at offset {self.offset}")
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def remaining(self) -> int:
        return len(self.blob) - self.offset


def decode_checkpoint(blob: bytes) -> Checkpoint:
    reader = _Reader(blob)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version, config_len = reader.unpack("<IQ")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    try:
        config = SailConfig.model_validate(json.loads(reader.take(config_len).decode("utf-8")))
    except (ValueError, ValidationError) as e:
        raise CheckpointError(f"checkpoint config is unreadable: {e}") from e

    if len(blob) < reader.offset + 4:
        raise CheckpointError("truncated checkpoint: missing record-count footer")
    (count,) = struct.unpack("<I", blob[-4:])
    body = _Reader(blob[:-4])
    body.offset = reader.offset

    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    try:
        for _ in range(count):
            (name_len,) = body.unpack("<I")
            name = body.take(name_len).decode("utf-8")
            (rank,) = body.unpack("<I")
            shape = body.unpack(f"<{rank}Q") if rank else ()
            size = 8 * int(np.prod(shape, dtype=object))
            tensors[name] = np.frombuffer(body.take(size), dtype="<f8").reshape(shape).astype(np.float64)
    except (UnicodeDecodeError, ValueError) as e:
        raise CheckpointError(f"corrupt tensor record: {e}") from e
    if body.remaining:
        raise CheckpointError(f"{body.remaining} bytes after the {count} records the footer declares")
    return Checkpoint(version=version, config=config, tensors=tensors)


def save_checkpoint(path: Union[str, Path], params: Union[ParamStore, Dict[str, np.ndarray]],
                    cfg: SailConfig) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(params, cfg))
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Raises FileNotFoundError for a missing file and CheckpointError for a malformed one."""
    return decode_checkpoint(Path(path).read_bytes())
