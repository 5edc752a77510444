"""Writers and re-readers for the toolkit's wire formats.

This adapter talks to the evaluation toolkit only through its file
formats, so the SVEM container and the JSON-lines manifest are
implemented here against the published byte layout, not imported.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ExtractorError

SVEM_MAGIC = b"SVEM"
SVEM_VERSION = 1
_HEADER = struct.Struct("<4sHHQII")

MANIFEST_KEYS = (
    "sample_id",
    "speaker_id",
    "language",
    "task",
    "session_index",
    "audio_duration_sec",
    "speech_duration_sec",
    "embedding_row",
    "model_tag",
)


def write_svem(matrix: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    rows, dim = arr.shape
    header = _HEADER.pack(SVEM_MAGIC, SVEM_VERSION, 0, rows, dim, 0)
    Path(path).write_bytes(header + arr.tobytes())


def read_svem(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ExtractorError(f"{path}: truncated SVEM header")
    magic, version, flags, rows, dim, reserved = _HEADER.unpack_from(raw)
    if magic != SVEM_MAGIC or version != SVEM_VERSION or flags or reserved:
        raise ExtractorError(f"{path}: not a version-{SVEM_VERSION} SVEM file")
    expected = rows * dim * 4
    if len(raw) - _HEADER.size != expected:
        raise ExtractorError(
            f"{path}: payload size mismatch, expected {expected} bytes"
        )
    return np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, dim)


def manifest_line(record: dict) -> str:
    missing = [k for k in MANIFEST_KEYS if k not in record]
    if missing:
        raise ExtractorError(f"manifest record missing keys {missing}")
    return json.dumps({k: record[k] for k in MANIFEST_KEYS}, ensure_ascii=False)


def write_manifest(records: list[dict], path: str | Path) -> None:
    Path(path).write_text(
        "".join(manifest_line(r) + "\n" for r in records), encoding="utf-8"
    )


def read_manifest(path: str | Path) -> list[dict]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        records.append(json.loads(line))
    return records
