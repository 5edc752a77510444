"""Shared fixture builders for the test suite."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from cohortguard import CohortDataset, EmbeddingMatrix, SampleRecord, bind_dataset


def make_record(
    sample_id: str,
    speaker_id: str,
    row: int,
    language: str = "en",
    task: str = "picture_description",
    session: int = 0,
    audio: float = 60.0,
    speech: float = 30.0,
    model_tag: str | None = None,
) -> SampleRecord:
    return SampleRecord(
        sample_id=sample_id,
        speaker_id=speaker_id,
        language=language,
        task=task,
        session_index=session,
        audio_duration_sec=audio,
        speech_duration_sec=speech,
        embedding_row=row,
        model_tag=model_tag,
    )


def rows_matrix(rows: Sequence[Sequence[float]]) -> EmbeddingMatrix:
    return EmbeddingMatrix(np.asarray(rows, dtype=np.float32))


def toy_dataset(
    speakers: Sequence[str],
    languages: Sequence[str] | str = "en",
    tasks: Sequence[str] | str = "picture_description",
    dim: int = 8,
    sigma: float = 0.05,
    seed: int = 0,
    dataset_id: str = "toy",
    model_tags: Sequence[str | None] | None = None,
) -> CohortDataset:
    """One sample per entry of ``speakers``; embeddings are per-speaker
    centroids on the unit sphere plus noise, so same-speaker cosine is
    high and cross-speaker cosine is near zero."""
    n = len(speakers)
    langs = [languages] * n if isinstance(languages, str) else list(languages)
    task_list = [tasks] * n if isinstance(tasks, str) else list(tasks)
    tags = [None] * n if model_tags is None else list(model_tags)
    rng = np.random.default_rng(seed)
    centroids: dict[str, np.ndarray] = {}
    vectors = []
    for spk in speakers:
        if spk not in centroids:
            v = rng.standard_normal(dim)
            centroids[spk] = v / np.linalg.norm(v)
        sample = centroids[spk] + sigma * rng.standard_normal(dim)
        vectors.append(sample / np.linalg.norm(sample))
    records = [
        make_record(
            f"s{i:03d}",
            spk,
            i,
            language=langs[i],
            task=task_list[i],
            session=i,
            model_tag=tags[i],
        )
        for i, spk in enumerate(speakers)
    ]
    matrix = EmbeddingMatrix(np.asarray(vectors, dtype=np.float32))
    return bind_dataset(records, matrix, dataset_id)


def counts_to_speakers(counts: Sequence[int]) -> list[str]:
    """[2, 3] -> ['spk0', 'spk0', 'spk1', 'spk1', 'spk1']."""
    out: list[str] = []
    for i, c in enumerate(counts):
        out.extend([f"spk{i}"] * c)
    return out
