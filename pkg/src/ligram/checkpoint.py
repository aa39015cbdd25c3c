"""Binary model checkpoints.

Layout, little-endian throughout: magic ``LGCK``, uint32 format version, a
length-prefixed UTF-8 JSON metadata block (run configuration, enabled
subgraphs, class names, input dims, best epoch), a uint32 parameter count,
then per parameter: uint32 name length, UTF-8 name, uint32 rows, uint32
cols, row-major float32 values.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .config import RunConfig
from .errors import LigramError
from .model import ModelParameters

MAGIC = b"LGCK"
FORMAT_VERSION = 1


class CheckpointError(LigramError):
    """Malformed or inconsistent checkpoint file."""


@dataclass
class Checkpoint:
    config: RunConfig
    kinds: tuple[str, ...]
    class_names: list[str]
    input_dims: dict[str, int]
    epoch: int
    val_accuracy: float
    arrays: dict[str, np.ndarray]

    def to_parameters(self) -> ModelParameters:
        weights = {name: ad.parameter(arr.copy()) for name, arr in self.arrays.items()}
        return ModelParameters(
            kinds=self.kinds,
            hidden=self.config.hidden,
            n_classes=len(self.class_names),
            weights=weights,
        )


def save_checkpoint(
    path: str | Path,
    params: ModelParameters,
    config: RunConfig,
    class_names: list[str],
    input_dims: dict[str, int],
    epoch: int,
    val_accuracy: float,
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "config": config.to_dict(),
        "kinds": list(params.kinds),
        "class_names": list(class_names),
        "input_dims": dict(input_dims),
        "epoch": epoch,
        "val_accuracy": val_accuracy,
    }
    meta_bytes = json.dumps(meta, ensure_ascii=False, sort_keys=True).encode("utf-8")
    named = params.named()
    with path.open("wb") as handle:
        handle.write(struct.pack("<4sI", MAGIC, FORMAT_VERSION))
        handle.write(struct.pack("<I", len(meta_bytes)))
        handle.write(meta_bytes)
        handle.write(struct.pack("<I", len(named)))
        for name, tensor in named:
            encoded = name.encode("utf-8")
            rows, cols = tensor.values.shape
            handle.write(struct.pack("<I", len(encoded)))
            handle.write(encoded)
            handle.write(struct.pack("<II", rows, cols))
            handle.write(np.ascontiguousarray(tensor.values, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    view = memoryview(blob)
    offset = 0

    def take(fmt: str):
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(blob):
            raise CheckpointError(f"{path}: truncated checkpoint")
        out = struct.unpack_from(fmt, view, offset)
        offset += size
        return out

    magic, version = take("<4sI")
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (meta_len,) = take("<I")
    if offset + meta_len > len(blob):
        raise CheckpointError(f"{path}: truncated metadata")
    meta = json.loads(bytes(view[offset : offset + meta_len]).decode("utf-8"))
    offset += meta_len
    (n_params,) = take("<I")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        (name_len,) = take("<I")
        name = bytes(view[offset : offset + name_len]).decode("utf-8")
        offset += name_len
        rows, cols = take("<II")
        size = rows * cols * 4
        if offset + size > len(blob):
            raise CheckpointError(f"{path}: truncated values for {name!r}")
        arrays[name] = (
            np.frombuffer(view, dtype="<f4", count=rows * cols, offset=offset)
            .reshape(rows, cols)
            .astype(np.float32)
        )
        offset += size
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    config = RunConfig.from_dict(meta["config"])
    return Checkpoint(
        config=config,
        kinds=tuple(meta["kinds"]),
        class_names=list(meta["class_names"]),
        input_dims={k: int(v) for k, v in meta["input_dims"].items()},
        epoch=int(meta["epoch"]),
        val_accuracy=float(meta["val_accuracy"]),
        arrays=arrays,
    )
