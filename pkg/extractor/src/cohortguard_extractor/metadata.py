"""Metadata CSV ingestion.

One row per recording: sample_id,speaker_id,language,task,session_index.
Row order is authoritative: it becomes both manifest order and matrix
row order.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import MetadataError

COLUMNS = ("sample_id", "speaker_id", "language", "task", "session_index")

# task vocabulary of the manifest schema the adapter emits
TASKS = (
    "picture_description",
    "phonemic_fluency",
    "semantic_fluency",
    "paragraph_reading",
    "paragraph_recall",
    "journaling",
)

_LANGUAGE_RE = re.compile(r"^[a-z]{2}$")


@dataclass(frozen=True)
class MetadataRow:
    sample_id: str
    speaker_id: str
    language: str
    task: str
    session_index: int


def read_metadata_csv(path: str | Path) -> list[MetadataRow]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MetadataError(f"{path}: cannot read metadata: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise MetadataError(f"{path}: empty metadata CSV") from None
    if tuple(header) != COLUMNS:
        raise MetadataError(
            f"{path}: expected header {','.join(COLUMNS)}, got {','.join(header)}"
        )
    rows: list[MetadataRow] = []
    seen: dict[str, int] = {}
    for line_no, cells in enumerate(reader, start=2):
        if not cells:
            continue
        if len(cells) != len(COLUMNS):
            raise MetadataError(
                f"{path}:{line_no}: expected {len(COLUMNS)} cells, got {len(cells)}"
            )
        sample_id, speaker_id, language, task, session = (c.strip() for c in cells)
        where = f"{path}:{line_no}"
        if not sample_id or not speaker_id:
            raise MetadataError(f"{where}: empty sample_id or speaker_id")
        if sample_id in seen:
            raise MetadataError(
                f"{where}: duplicate sample_id {sample_id!r} "
                f"(first seen on line {seen[sample_id]})"
            )
        seen[sample_id] = line_no
        if not _LANGUAGE_RE.match(language):
            raise MetadataError(
                f"{where}: language {language!r} is not a lowercase two-letter code"
            )
        if task not in TASKS:
            raise MetadataError(f"{where}: unknown task {task!r}")
        try:
            session_index = int(session)
        except ValueError:
            raise MetadataError(f"{where}: session_index {session!r} is not an integer") from None
        if session_index < 0:
            raise MetadataError(f"{where}: negative session_index {session_index}")
        rows.append(
            MetadataRow(
                sample_id=sample_id,
                speaker_id=speaker_id,
                language=language,
                task=task,
                session_index=session_index,
            )
        )
    if not rows:
        raise MetadataError(f"{path}: metadata CSV has no data rows")
    return rows
