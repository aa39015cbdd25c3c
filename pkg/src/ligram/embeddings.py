"""Embedding tables and their binary file format.

The binary layout is little-endian throughout: magic ``LGEM``, a uint32
format version, a uint64 row count, a uint32 dimension, then row-major
float32 values. A companion UTF-8 token file (same path plus ``.tokens``)
carries one token per line; line ``i`` labels row ``i``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmbeddingError

MAGIC = b"LGEM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQI")


@dataclass
class EmbeddingTable:
    """Token-to-vector association with a single fixed dimension."""

    dim: int
    rows: dict[str, np.ndarray]

    def __post_init__(self):
        if self.dim <= 0:
            raise EmbeddingError(f"embedding dim must be positive, got {self.dim}")
        for token, vec in self.rows.items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (self.dim,):
                raise EmbeddingError(
                    f"token {token!r}: vector has shape {arr.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(arr)):
                raise EmbeddingError(f"token {token!r}: vector contains NaN/Inf")
            self.rows[token] = arr

    def __contains__(self, token: str) -> bool:
        return token in self.rows

    def __len__(self) -> int:
        return len(self.rows)

    def vector(self, token: str) -> np.ndarray:
        try:
            return self.rows[token]
        except KeyError:
            raise EmbeddingError(f"token {token!r} has no embedding row") from None

    @classmethod
    def from_matrix(cls, tokens: list[str], matrix: np.ndarray) -> "EmbeddingTable":
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise EmbeddingError(
                f"matrix shape {matrix.shape} does not match {len(tokens)} tokens"
            )
        return cls(dim=int(matrix.shape[1]), rows=dict(zip(tokens, matrix)))


def token_file_for(path: str | Path) -> Path:
    """Path of the companion token file for an embedding binary."""
    path = Path(path)
    return path.with_name(path.name + ".tokens")


def write_embedding_table(table: EmbeddingTable, path: str | Path) -> None:
    """Write the binary table plus its companion token file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tokens = list(table.rows)
    matrix = np.stack([table.rows[t] for t in tokens]) if tokens else np.zeros(
        (0, table.dim), dtype=np.float32
    )
    with path.open("wb") as handle:
        handle.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(tokens), table.dim))
        handle.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
    with token_file_for(path).open("w", encoding="utf-8", newline="\n") as handle:
        for token in tokens:
            handle.write(token)
            handle.write("\n")


def read_embedding_table(path: str | Path) -> EmbeddingTable:
    """Read a binary embedding table, validating structure and finiteness.

    Raises :class:`EmbeddingError` naming ``path`` on a bad magic, an
    unsupported version, a truncated payload, or a token file whose line
    count disagrees with the header row count.
    """
    path = Path(path)
    if not path.is_file():
        raise EmbeddingError(f"embedding file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise EmbeddingError(f"{path}: file too short for header")
    magic, version, n_rows, dim = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise EmbeddingError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise EmbeddingError(f"{path}: unsupported format version {version}")
    if dim == 0:
        raise EmbeddingError(f"{path}: embedding dim must be positive")
    expected = _HEADER.size + n_rows * dim * 4
    if len(blob) != expected:
        raise EmbeddingError(
            f"{path}: payload is {len(blob)} bytes, header implies {expected} "
            f"({n_rows} rows x dim {dim})"
        )
    matrix = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(n_rows, dim)
    token_path = token_file_for(path)
    if not token_path.is_file():
        raise EmbeddingError(f"{path}: missing token file {token_path}")
    tokens = token_path.read_text(encoding="utf-8").splitlines()
    if len(tokens) != n_rows:
        raise EmbeddingError(
            f"{token_path}: {len(tokens)} tokens but {path} declares {n_rows} rows"
        )
    if len(set(tokens)) != len(tokens):
        raise EmbeddingError(f"{token_path}: duplicate tokens")
    if not np.all(np.isfinite(matrix)):
        raise EmbeddingError(f"{path}: contains NaN/Inf values")
    return EmbeddingTable.from_matrix(tokens, np.array(matrix, dtype=np.float32))
