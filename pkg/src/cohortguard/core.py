"""Domain types, ingestion, validation, and cohort statistics.

A cohort on disk is two files: a line-delimited manifest (one JSON
object per line, exactly the :class:`SampleRecord` fields as keys) and
a SVEM embedding matrix. ``load_manifest`` + ``load_embeddings`` +
``bind_dataset`` turn them into a validated :class:`CohortDataset`.

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import svem
from .errors import FormatError, ValidationError

TASKS = (
    "picture_description",
    "phonemic_fluency",
    "semantic_fluency",
    "paragraph_reading",
    "paragraph_recall",
    "journaling",
)

_LANGUAGE_RE = re.compile(r"^[a-z]{2}$")


class EmbeddingMatrix:
    """Dense row-major matrix of per-sample embedding vectors.

    Storage is float32 (matching the SVEM payload); squared row norms
    are precomputed in float64 once and reused by every scorer. Rows
    are never re-normalized at ingest: cosine scoring is scale
    invariant, so stored data stays faithful to whatever extractor
    produced it. Non-finite values and zero-norm rows are hard errors
    because cosine is undefined on them.
    """

    __slots__ = ("_data", "_sq_norms")

    def __init__(self, data: np.ndarray, source: str = "<matrix>"):
        arr = np.ascontiguousarray(data, dtype=np.float32)
        if arr.ndim != 2:
            raise ValidationError(f"{source}: embedding data must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 1:
            raise ValidationError(f"{source}: dim must be positive, got {arr.shape[1]}")
        finite = np.isfinite(arr)
        if not finite.all():
            bad_row = int(np.nonzero(~finite.all(axis=1))[0][0])
            raise ValidationError(f"{source}: non-finite value in row {bad_row}")
        wide = arr.astype(np.float64)
        sq = np.einsum("ij,ij->i", wide, wide)
        zero = np.nonzero(sq == 0.0)[0]
        if zero.size:
            raise ValidationError(f"{source}: zero-norm row {int(zero[0])}")
        arr.setflags(write=False)
        sq.setflags(write=False)
        self._data = arr
        self._sq_norms = sq

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def sq_norms(self) -> np.ndarray:
        """Float64 squared Euclidean norm of each row."""
        return self._sq_norms

    @property
    def row_count(self) -> int:
        return self._data.shape[0]

    @property
    def dim(self) -> int:
        return self._data.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self._data[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return self._data.shape == other._data.shape and bool(
            (self._data == other._data).all()
        )

    def __repr__(self) -> str:
        return f"EmbeddingMatrix(rows={self.row_count}, dim={self.dim})"


@dataclass(frozen=True)
class SampleRecord:
    """Metadata for one recorded sample, bound to one matrix row.

    ``model_tag`` is optional free-form provenance (which extractor and
    version produced the embedding); everything else is required.
    """

    sample_id: str
    speaker_id: str
    language: str
    task: str
    session_index: int
    audio_duration_sec: float
    speech_duration_sec: float
    embedding_row: int
    model_tag: str | None = None


_REQUIRED_KEYS = tuple(f.name for f in fields(SampleRecord) if f.name != "model_tag")
_ALLOWED_KEYS = frozenset(f.name for f in fields(SampleRecord))


def _check_record(rec: SampleRecord, where: str) -> None:
    if not rec.sample_id:
        raise ValidationError(f"{where}: empty sample_id")
    if not rec.speaker_id:
        raise ValidationError(f"{where}: empty speaker_id")
    if not _LANGUAGE_RE.match(rec.language):
        raise ValidationError(
            f"{where}: language {rec.language!r} is not a lowercase two-letter code"
        )
    if rec.task not in TASKS:
        raise ValidationError(
            f"{where}: unknown task {rec.task!r}, expected one of {', '.join(TASKS)}"
        )
    if rec.session_index < 0:
        raise ValidationError(f"{where}: negative session_index {rec.session_index}")
    if rec.audio_duration_sec < 0:
        raise ValidationError(
            f"{where}: negative audio_duration_sec {rec.audio_duration_sec}"
        )
    if rec.speech_duration_sec < 0:
        raise ValidationError(
            f"{where}: negative speech_duration_sec {rec.speech_duration_sec}"
        )
    if rec.speech_duration_sec > rec.audio_duration_sec:
        raise ValidationError(
            f"{where}: sample {rec.sample_id!r} has speech_duration_sec "
            f"{rec.speech_duration_sec} > audio_duration_sec {rec.audio_duration_sec}"
        )
    if rec.embedding_row < 0:
        raise ValidationError(f"{where}: negative embedding_row {rec.embedding_row}")
    if rec.model_tag is not None and not isinstance(rec.model_tag, str):
        raise ValidationError(f"{where}: model_tag must be a string")


def _record_from_obj(obj: object, where: str) -> SampleRecord:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected a JSON object, got {type(obj).__name__}")
    unknown = set(obj) - _ALLOWED_KEYS
    if unknown:
        raise ValidationError(f"{where}: unknown keys {sorted(unknown)}")
    missing = [k for k in _REQUIRED_KEYS if k not in obj]
    if missing:
        raise ValidationError(f"{where}: missing keys {missing}")

    def _str(key: str) -> str:
        v = obj[key]
        if not isinstance(v, str):
            raise ValidationError(f"{where}: field {key!r} must be a string")
        return v

    def _int(key: str) -> int:
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValidationError(f"{where}: field {key!r} must be an integer")
        return v

    def _num(key: str) -> float:
        v = obj[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(f"{where}: field {key!r} must be a number")
        if not math.isfinite(v):
            raise ValidationError(f"{where}: field {key!r} must be finite")
        return float(v)

    rec = SampleRecord(
        sample_id=_str("sample_id"),
        speaker_id=_str("speaker_id"),
        language=_str("language"),
        task=_str("task"),
        session_index=_int("session_index"),
        audio_duration_sec=_num("audio_duration_sec"),
        speech_duration_sec=_num("speech_duration_sec"),
        embedding_row=_int("embedding_row"),
        model_tag=obj.get("model_tag"),
    )
    _check_record(rec, where)
    return rec


def iter_manifest(path: str | Path) -> Iterator[SampleRecord]:
    """Parse manifest lines one at a time, raising on the first problem.

    Duplicate sample_id detection needs the whole file; use
    :func:`load_manifest` for that.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: cannot read manifest: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: manifest is not valid UTF-8: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        where = f"{path}:{line_no}"
        if not line.strip():
            raise FormatError(f"{where}: blank line in manifest")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{where}: malformed line: {exc.msg}") from exc
        yield _record_from_obj(obj, where)


def collect_manifest_diagnostics(
    path: str | Path,
) -> tuple[list[SampleRecord], list[str], list[str]]:
    """Best-effort parse of every line for validation tooling.

    Returns (good records, format problems, validation problems); the
    strict loaders stop at the first problem instead.
    """
    path = Path(path)
    records: list[SampleRecord] = []
    format_errors: list[str] = []
    validation_errors: list[str] = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        return [], [f"{path}: cannot read manifest: {exc}"], []
    except UnicodeDecodeError as exc:
        return [], [f"{path}: manifest is not valid UTF-8: {exc}"], []
    seen: dict[str, int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        where = f"{path}:{line_no}"
        if not line.strip():
            format_errors.append(f"{where}: blank line in manifest")
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            format_errors.append(f"{where}: malformed line: {exc.msg}")
            continue
        try:
            rec = _record_from_obj(obj, where)
        except FormatError as exc:
            format_errors.append(str(exc))
            continue
        except ValidationError as exc:
            validation_errors.append(str(exc))
            continue
        prev = seen.get(rec.sample_id)
        if prev is not None:
            validation_errors.append(
                f"{where}: duplicate sample_id {rec.sample_id!r} "
                f"(first seen on line {prev})"
            )
            continue
        seen[rec.sample_id] = line_no
        records.append(rec)
    return records, format_errors, validation_errors


def load_manifest(path: str | Path) -> list[SampleRecord]:
    """Load all records in file order, rejecting duplicate sample_ids."""
    records: list[SampleRecord] = []
    seen: dict[str, int] = {}
    for line_no, rec in enumerate(iter_manifest(path), start=1):
        prev = seen.get(rec.sample_id)
        if prev is not None:
            raise ValidationError(
                f"{path}:{line_no}: duplicate sample_id {rec.sample_id!r} "
                f"(first seen on line {prev})"
            )
        seen[rec.sample_id] = line_no
        records.append(rec)
    return records


def manifest_line(rec: SampleRecord) -> str:
    obj: dict[str, object] = {
        "sample_id": rec.sample_id,
        "speaker_id": rec.speaker_id,
        "language": rec.language,
        "task": rec.task,
        "session_index": rec.session_index,
        "audio_duration_sec": rec.audio_duration_sec,
        "speech_duration_sec": rec.speech_duration_sec,
        "embedding_row": rec.embedding_row,
    }
    if rec.model_tag is not None:
        obj["model_tag"] = rec.model_tag
    return json.dumps(obj, ensure_ascii=False)


def write_manifest(records: Iterable[SampleRecord], path: str | Path) -> None:
    text = "".join(manifest_line(r) + "\n" for r in records)
    Path(path).write_text(text, encoding="utf-8")


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read a SVEM file into a validated matrix, bit-exact."""
    return EmbeddingMatrix(svem.read_svem(path), source=str(path))


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    svem.write_svem(matrix.data, path)


class UnreferencedRowWarning(UserWarning):
    """Matrix rows not referenced by any record (sub-manifest usage)."""


@dataclass(frozen=True)
class CohortDataset:
    """Sample records bound to an embedding matrix.

    Construct via :func:`bind_dataset`, which enforces the
    cross-reference invariants.
    """

    records: tuple[SampleRecord, ...]
    matrix: EmbeddingMatrix
    dataset_id: str

    def __len__(self) -> int:
        return len(self.records)

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(sorted({r.language for r in self.records}))

    @property
    def speakers(self) -> tuple[str, ...]:
        return tuple(sorted({r.speaker_id for r in self.records}))


def bind_dataset(
    records: Iterable[SampleRecord],
    matrix: EmbeddingMatrix,
    dataset_id: str,
    *,
    on_unreferenced: str = "warn",
) -> CohortDataset:
    """Bind records to matrix rows and re-check every invariant.

    Each record must reference a distinct in-range row. Rows referenced
    by no record are a warning by default (``on_unreferenced="warn"``):
    this supports sub-manifests over a shared matrix file. Pass
    ``"error"`` to reject them or ``"ignore"`` to stay silent.
    """
    if on_unreferenced not in ("warn", "error", "ignore"):
        raise ValueError(f"on_unreferenced must be warn/error/ignore, got {on_unreferenced!r}")
    recs = tuple(records)
    if not recs:
        raise ValidationError(f"dataset {dataset_id!r}: no records")

    seen_ids: dict[str, str] = {}
    row_owner: dict[int, str] = {}
    for rec in recs:
        _check_record(rec, f"dataset {dataset_id!r}")
        if rec.sample_id in seen_ids:
            raise ValidationError(
                f"dataset {dataset_id!r}: duplicate sample_id {rec.sample_id!r}"
            )
        seen_ids[rec.sample_id] = rec.sample_id
        if rec.embedding_row >= matrix.row_count:
            raise ValidationError(
                f"dataset {dataset_id!r}: sample {rec.sample_id!r} references row "
                f"{rec.embedding_row}, matrix has {matrix.row_count} rows"
            )
        owner = row_owner.get(rec.embedding_row)
        if owner is not None:
            raise ValidationError(
                f"dataset {dataset_id!r}: row {rec.embedding_row} referenced by both "
                f"{owner!r} and {rec.sample_id!r}"
            )
        row_owner[rec.embedding_row] = rec.sample_id

    unreferenced = matrix.row_count - len(row_owner)
    if unreferenced and on_unreferenced != "ignore":
        msg = (
            f"dataset {dataset_id!r}: {unreferenced} matrix row(s) referenced by no record"
        )
        if on_unreferenced == "error":
            raise ValidationError(msg)
        warnings.warn(msg, UnreferencedRowWarning, stacklevel=2)

    ds = CohortDataset(records=recs, matrix=matrix, dataset_id=dataset_id)
    stats = cohort_stats(ds)
    assert stats.total_samples == sum(stats.samples_per_speaker.values())
    return ds


@dataclass(frozen=True)
class CohortStats:
    """Speaker/sample counts and duration averages for one cohort."""

    speaker_count: int
    samples_per_speaker: Mapping[str, int]
    total_samples: int
    avg_samples_per_speaker: float
    std_samples_per_speaker: float
    avg_audio_duration_sec: float
    avg_speech_duration_sec: float

    @property
    def samples_per_speaker_display(self) -> str:
        """One-decimal ``avg±std`` string, e.g. ``10.7±7.0``."""
        return f"{self.avg_samples_per_speaker:.1f}±{self.std_samples_per_speaker:.1f}"


def cohort_stats(dataset: CohortDataset) -> CohortStats:
    """Count speakers and samples and average the durations.

    The stdev of per-speaker counts is the population stdev (divide by
    the speaker count), matching descriptive-statistics reporting.
    Record order never matters.
    """
    counts: dict[str, int] = {}
    for rec in dataset.records:
        counts[rec.speaker_id] = counts.get(rec.speaker_id, 0) + 1
    counts = dict(sorted(counts.items()))
    n = len(dataset.records)
    m = len(counts)
    per_speaker = np.array(list(counts.values()), dtype=np.float64)
    return CohortStats(
        speaker_count=m,
        samples_per_speaker=counts,
        total_samples=n,
        avg_samples_per_speaker=float(per_speaker.mean()),
        std_samples_per_speaker=float(per_speaker.std()),
        avg_audio_duration_sec=float(
            np.mean([r.audio_duration_sec for r in dataset.records])
        ),
        avg_speech_duration_sec=float(
            np.mean([r.speech_duration_sec for r in dataset.records])
        ),
    )
