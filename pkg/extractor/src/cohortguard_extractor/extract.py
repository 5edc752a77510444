"""Extraction jobs: audio + metadata in, manifest + SVEM out.

The adapter never computes scores or metrics; it produces exactly the
files the evaluation toolkit ingests, one embedding row per audio file,
in metadata CSV order, and re-validates its own output in-process
before returning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import find_audio_file, load_audio
from .backends import MODEL_TAGS, EmbeddingBackend, resolve_backend
from .emit import read_manifest, read_svem, write_manifest, write_svem
from .errors import AudioError, ExtractorError, MetadataError
from .metadata import MetadataRow, read_metadata_csv


@dataclass(frozen=True)
class ExtractionJob:
    audio_dir: Path
    metadata_csv: Path
    model_tag: str
    out_manifest: Path
    out_matrix: Path

    def __post_init__(self) -> None:
        if self.model_tag not in MODEL_TAGS:
            raise ExtractorError(
                f"unknown model tag {self.model_tag!r}, expected one of {MODEL_TAGS}"
            )


@dataclass(frozen=True)
class ExtractionResult:
    emitted: int
    dim: int
    model_tag_stamp: str
    skipped: tuple[str, ...] = field(default_factory=tuple)


def _resolve_files(audio_dir: Path, rows: list[MetadataRow]) -> dict[str, Path]:
    missing = []
    files = {}
    for row in rows:
        path = find_audio_file(audio_dir, row.sample_id)
        if path is None:
            missing.append(row.sample_id)
        else:
            files[row.sample_id] = path
    if missing:
        raise MetadataError(
            f"{len(missing)} metadata row(s) have no matching audio file in "
            f"{audio_dir}: {', '.join(missing[:10])}"
        )
    return files


def _verify_emitted(job: ExtractionJob, records: list[dict]) -> None:
    """Re-read both files and re-check the ingestion invariants."""
    matrix = read_svem(job.out_matrix)
    reloaded = read_manifest(job.out_manifest)
    if len(reloaded) != len(records) or len(reloaded) != matrix.shape[0]:
        raise ExtractorError("emitted record/row counts disagree")
    if not np.isfinite(matrix).all():
        raise ExtractorError("emitted matrix contains non-finite values")
    norms = np.einsum("ij,ij->i", matrix.astype(np.float64), matrix.astype(np.float64))
    if (norms == 0.0).any():
        raise ExtractorError("emitted matrix contains a zero-norm row")
    seen_rows = set()
    seen_ids = set()
    for idx, rec in enumerate(reloaded):
        if rec["sample_id"] in seen_ids:
            raise ExtractorError(f"duplicate sample_id {rec['sample_id']!r}")
        seen_ids.add(rec["sample_id"])
        row = rec["embedding_row"]
        if not 0 <= row < matrix.shape[0] or row in seen_rows:
            raise ExtractorError(f"bad embedding_row {row} for {rec['sample_id']!r}")
        seen_rows.add(row)
        if rec["speech_duration_sec"] > rec["audio_duration_sec"]:
            raise ExtractorError(f"speech > audio for {rec['sample_id']!r}")
        if row != idx:
            raise ExtractorError("manifest order does not match matrix row order")


def extract(
    job: ExtractionJob,
    backend: EmbeddingBackend | None = None,
    skip_bad_audio: bool = False,
) -> ExtractionResult:
    """Run the job; returns a summary after in-process re-validation.

    Undecodable audio either fails the job (default) or is skipped and
    reported, per ``skip_bad_audio``. Skipped samples appear in neither
    the manifest nor the matrix, so row alignment is preserved.
    """
    rows = read_metadata_csv(job.metadata_csv)
    files = _resolve_files(Path(job.audio_dir), rows)
    if backend is None:
        backend = resolve_backend(job.model_tag)
    stamp = f"{job.model_tag}+{backend.name}@{backend.version}"

    records: list[dict] = []
    vectors: list[np.ndarray] = []
    skipped: list[str] = []
    for row in rows:
        try:
            decoded = load_audio(files[row.sample_id])
            vector = backend.embed(decoded.samples, decoded.sample_rate)
        except AudioError as exc:
            if not skip_bad_audio:
                raise
            skipped.append(f"{row.sample_id}: {exc}")
            continue
        vector = np.asarray(vector, dtype=np.float32).ravel()
        if vectors and vector.size != vectors[0].size:
            raise ExtractorError(
                f"{row.sample_id}: backend produced dim {vector.size}, "
                f"expected {vectors[0].size}"
            )
        duration = round(decoded.duration_sec, 3)
        records.append(
            {
                "sample_id": row.sample_id,
                "speaker_id": row.speaker_id,
                "language": row.language,
                "task": row.task,
                "session_index": row.session_index,
                "audio_duration_sec": duration,
                # no activity detection in the available backends, so
                # voiced duration falls back to the full audio length
                "speech_duration_sec": duration,
                "embedding_row": len(vectors),
                "model_tag": stamp,
            }
        )
        vectors.append(vector)

    if not vectors:
        raise ExtractorError("no samples could be embedded; nothing emitted")
    matrix = np.vstack(vectors)
    write_svem(matrix, job.out_matrix)
    write_manifest(records, job.out_manifest)
    _verify_emitted(job, records)
    return ExtractionResult(
        emitted=len(records),
        dim=int(matrix.shape[1]),
        model_tag_stamp=stamp,
        skipped=tuple(skipped),
    )
