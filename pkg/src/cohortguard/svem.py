"""Reader/writer for the SVEM embedding-matrix container.

Layout (all little-endian):

========  ====  =====================================
offset    size  field
========  ====  =====================================
0         4     magic, ASCII ``SVEM``
4         2     format version, uint16, currently 1
6         2     flags, uint16, must be 0
8         8     row_count, uint64
16        4     dim, uint32
20        4     reserved, uint32, must be 0
24        ...   row_count * dim float32, row-major
========  ====  =====================================

Reads are bit-exact: the float32 payload is handed to
:class:`~cohortguard.core.EmbeddingMatrix` untouched, and
``write_embeddings`` followed by ``load_embeddings`` round-trips any
valid matrix byte-for-byte.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"SVEM"
VERSION = 1
_HEADER = struct.Struct("<4sHHQII")
HEADER_SIZE = _HEADER.size  # 24


def read_svem_bytes(raw: bytes, source: str = "<bytes>") -> np.ndarray:
    """Decode a SVEM byte string into a float32 array of shape (rows, dim)."""
    if len(raw) < HEADER_SIZE:
        raise FormatError(
            f"{source}: truncated header, expected {HEADER_SIZE} bytes, found {len(raw)}"
        )
    magic, version, flags, row_count, dim, reserved = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version}, expected {VERSION}")
    if flags != 0:
        raise FormatError(f"{source}: unsupported flags 0x{flags:04x}, expected 0")
    if reserved != 0:
        raise FormatError(f"{source}: nonzero reserved field 0x{reserved:08x}")
    if dim == 0:
        raise FormatError(f"{source}: dim must be positive, found 0")
    expected = row_count * dim * 4
    actual = len(raw) - HEADER_SIZE
    if actual != expected:
        raise FormatError(
            f"{source}: truncated payload, expected {expected} bytes "
            f"({row_count} rows x {dim} dims x 4), found {actual}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE)
    return data.reshape(row_count, dim)


def read_svem(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read embeddings file: {exc}") from exc
    return read_svem_bytes(raw, source=str(path))


def svem_bytes(data: np.ndarray) -> bytes:
    """Encode a (rows, dim) float32 array as SVEM bytes."""
    arr = np.ascontiguousarray(data, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    rows, dim = arr.shape
    header = _HEADER.pack(MAGIC, VERSION, 0, rows, dim, 0)
    return header + arr.tobytes()


def write_svem(data: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(svem_bytes(data))
