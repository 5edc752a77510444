"""Deterministic synthetic cohorts with known ground truth.

Each speaker is a centroid drawn uniformly on the unit sphere; each
sample is the centroid plus isotropic Gaussian noise, re-normalized to
unit length, so one parameter (``noise_sigma``) controls cosine
separability. Duplicate injection registers an extra speaker identity
that shares an existing speaker's centroid — a planted enrollment
fraud for the dedup module to find.

This is a test/benchmark scaffold: it makes no attempt to model
clinical speech, channel noise, or duration effects.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    TASKS,
    CohortDataset,
    EmbeddingMatrix,
    SampleRecord,
    bind_dataset,
    write_embeddings,
    write_manifest,
)
from .errors import ValidationError

# numpy Generator seeded from SynthSpec.seed; recorded in fixture
# metadata so fixtures can be regenerated by any port of the generator
RNG_ALGORITHM = "numpy-default-rng-pcg64"

GROUND_TRUTH_HEADER = ("alias_speaker_id", "true_speaker_id")


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for one synthetic cohort."""

    n_speakers: int
    samples_per_speaker_mean: float
    samples_per_speaker_jitter: int
    dim: int
    noise_sigma: float
    seed: int
    languages: tuple[tuple[str, float], ...] = (("en", 1.0),)
    tasks: tuple[tuple[str, float], ...] = (("picture_description", 1.0),)
    duplicate_injections: int = 0
    orthogonal_centroids: bool = False  # test hook; needs dim >= identities
    dataset_id: str = ""

    def __post_init__(self) -> None:
        if self.n_speakers < 1:
            raise ValidationError("n_speakers must be positive")
        if self.dim < 2:
            raise ValidationError(f"dim must be >= 2, got {self.dim}")
        if self.samples_per_speaker_mean < 1:
            raise ValidationError("samples_per_speaker_mean must be >= 1")
        if self.samples_per_speaker_jitter < 0:
            raise ValidationError("samples_per_speaker_jitter must be >= 0")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        if not 0 <= self.duplicate_injections < self.n_speakers:
            raise ValidationError(
                "duplicate_injections must be in [0, n_speakers)"
            )
        if self.seed < 0 or self.seed >= 2**64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        for name, pairs in (("languages", self.languages), ("tasks", self.tasks)):
            if not pairs:
                raise ValidationError(f"{name} must be nonempty")
            for code, weight in pairs:
                if weight <= 0:
                    raise ValidationError(f"{name} weight for {code!r} must be positive")
        for task, _ in self.tasks:
            if task not in TASKS:
                raise ValidationError(f"unknown task {task!r}")

    @property
    def effective_dataset_id(self) -> str:
        return self.dataset_id or f"synth-{self.seed}"

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"bad synth spec JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ValidationError("synth spec must be a JSON object")
        known = {
            "n_speakers",
            "samples_per_speaker_mean",
            "samples_per_speaker_jitter",
            "dim",
            "noise_sigma",
            "seed",
            "languages",
            "tasks",
            "duplicate_injections",
            "orthogonal_centroids",
            "dataset_id",
        }
        unknown = set(obj) - known
        if unknown:
            raise ValidationError(f"unknown synth spec keys {sorted(unknown)}")
        try:
            kwargs = dict(obj)
            if "languages" in kwargs:
                kwargs["languages"] = tuple(
                    (str(c), float(w)) for c, w in kwargs["languages"]
                )
            if "tasks" in kwargs:
                kwargs["tasks"] = tuple((str(t), float(w)) for t, w in kwargs["tasks"])
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"bad synth spec: {exc}") from exc

    def to_json(self) -> str:
        obj = {
            "n_speakers": self.n_speakers,
            "samples_per_speaker_mean": self.samples_per_speaker_mean,
            "samples_per_speaker_jitter": self.samples_per_speaker_jitter,
            "dim": self.dim,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "languages": [list(p) for p in self.languages],
            "tasks": [list(p) for p in self.tasks],
            "duplicate_injections": self.duplicate_injections,
            "orthogonal_centroids": self.orthogonal_centroids,
            "dataset_id": self.dataset_id,
        }
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _weighted(pairs: tuple[tuple[str, float], ...]) -> tuple[list[str], np.ndarray]:
    values = [v for v, _ in pairs]
    weights = np.array([w for _, w in pairs], dtype=np.float64)
    return values, weights / weights.sum()


def _unit_sphere(rng: np.random.Generator, dim: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 0:
            return v / norm


def generate_cohort(spec: SynthSpec) -> tuple[CohortDataset, dict[str, str]]:
    """Generate a cohort and the alias -> true speaker ground truth.

    Fully deterministic for a fixed spec: every random draw comes from
    one seeded generator in a fixed order.
    """
    rng = np.random.default_rng(spec.seed)
    languages, lang_p = _weighted(spec.languages)
    tasks, task_p = _weighted(spec.tasks)

    base_ids = [f"spk{i:03d}" for i in range(spec.n_speakers)]
    if spec.orthogonal_centroids:
        if spec.dim < spec.n_speakers:
            raise ValidationError(
                f"orthogonal centroids need dim >= {spec.n_speakers}, got {spec.dim}"
            )
        centroids = {sid: np.eye(spec.dim)[i] for i, sid in enumerate(base_ids)}
    else:
        centroids = {sid: _unit_sphere(rng, spec.dim) for sid in base_ids}
    speaker_lang = {
        sid: languages[rng.choice(len(languages), p=lang_p)] for sid in base_ids
    }

    ground_truth: dict[str, str] = {}
    all_ids = list(base_ids)
    if spec.duplicate_injections:
        target_idx = rng.choice(
            spec.n_speakers, size=spec.duplicate_injections, replace=False
        )
        for j, idx in enumerate(target_idx):
            orig = base_ids[int(idx)]
            alias = f"{orig}_dup{j}"
            ground_truth[alias] = orig
            centroids[alias] = centroids[orig]
            speaker_lang[alias] = speaker_lang[orig]
            all_ids.append(alias)

    records: list[SampleRecord] = []
    rows: list[np.ndarray] = []
    base_count = max(1, round(spec.samples_per_speaker_mean))
    for sid in all_ids:
        jitter = (
            int(rng.integers(-spec.samples_per_speaker_jitter,
                             spec.samples_per_speaker_jitter + 1))
            if spec.samples_per_speaker_jitter
            else 0
        )
        n_samples = max(1, base_count + jitter)
        centroid = centroids[sid]
        for k in range(n_samples):
            if spec.noise_sigma > 0:
                v = centroid + spec.noise_sigma * rng.standard_normal(spec.dim)
                norm = np.linalg.norm(v)
                while norm == 0.0:
                    v = centroid + spec.noise_sigma * rng.standard_normal(spec.dim)
                    norm = np.linalg.norm(v)
                v = v / norm
            else:
                v = centroid
            audio = round(float(rng.uniform(20.0, 180.0)), 2)
            speech = round(audio * float(rng.uniform(0.3, 0.95)), 2)
            records.append(
                SampleRecord(
                    sample_id=f"{sid}_s{k:02d}",
                    speaker_id=sid,
                    language=speaker_lang[sid],
                    task=tasks[rng.choice(len(tasks), p=task_p)],
                    session_index=k,
                    audio_duration_sec=audio,
                    speech_duration_sec=speech,
                    embedding_row=len(rows),
                )
            )
            rows.append(v)

    matrix = EmbeddingMatrix(
        np.asarray(rows, dtype=np.float32), source=spec.effective_dataset_id
    )
    dataset = bind_dataset(records, matrix, spec.effective_dataset_id)
    return dataset, ground_truth


def write_fixture(
    dataset: CohortDataset, manifest_path: str | Path, embeddings_path: str | Path
) -> None:
    """Write the manifest + SVEM pair; round-trips through the loaders."""
    write_manifest(dataset.records, manifest_path)
    write_embeddings(dataset.matrix, embeddings_path)


def write_ground_truth(mapping: dict[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(GROUND_TRUTH_HEADER)
        for alias in sorted(mapping):
            writer.writerow([alias, mapping[alias]])


def write_fixture_metadata(spec: SynthSpec, path: str | Path) -> None:
    """Sidecar recording the generator algorithm and full spec."""
    meta = {
        "generator": RNG_ALGORITHM,
        "spec": json.loads(spec.to_json()),
    }
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
