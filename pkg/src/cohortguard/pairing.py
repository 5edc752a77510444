"""Trial-pair construction and closed-form pair counting.

Positive pairs are unordered same-speaker sample pairs, negative pairs
unordered different-speaker pairs, always within one (dataset,
language) stratum; cross-language and cross-dataset pairs are never
generated. Counts obey

    positives = sum_i C(n_i, 2)
    negatives = (1/2) * sum_i n_i * (N - n_i)

and the two always sum to C(N, 2).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, NamedTuple

from .core import CohortDataset, CohortStats, SampleRecord
from .errors import EmptyScopeError, ValidationError


class PairLabel(str, Enum):
    SAME = "same_speaker"
    DIFFERENT = "different_speaker"

    def __str__(self) -> str:  # csv-friendly
        return self.value


class TrialPair(NamedTuple):
    """Unordered sample pair in canonical (low, high) row order."""

    row_a: int
    row_b: int
    label: PairLabel


@dataclass(frozen=True)
class PairScope:
    """Selects one stratum: a dataset, optionally one language and one task.

    ``language=None`` means every language, but pairs still never cross
    a language boundary.
    """

    dataset_id: str
    language: str | None = None
    task: str | None = None

    def text(self) -> str:
        parts = [self.dataset_id, self.language or "all"]
        if self.task:
            parts.append(self.task)
        return "/".join(parts)


@dataclass(frozen=True)
class PairPlan:
    """Closed-form positive/negative pair counts for one scope."""

    positive_count: int
    negative_count: int
    scope: PairScope | None = None

    @property
    def total(self) -> int:
        return self.positive_count + self.negative_count


def plan_pairs(stats: CohortStats, scope: PairScope | None = None) -> PairPlan:
    """Predict pair counts from per-speaker sample counts.

    Python integers are arbitrary precision, so the arithmetic is exact
    for any cohort size.
    """
    n_total = stats.total_samples
    positives = 0
    negatives = 0
    for n_i in stats.samples_per_speaker.values():
        positives += n_i * (n_i - 1) // 2
        negatives += n_i * (n_total - n_i)
    negatives //= 2
    plan = PairPlan(positive_count=positives, negative_count=negatives, scope=scope)
    assert plan.total == n_total * (n_total - 1) // 2
    return plan


def _in_scope(rec: SampleRecord, scope: PairScope | None) -> bool:
    if scope is None:
        return True
    if scope.language is not None and rec.language != scope.language:
        return False
    if scope.task is not None and rec.task != scope.task:
        return False
    return True


def scoped_records(dataset: CohortDataset, scope: PairScope | None) -> list[SampleRecord]:
    if scope is not None and scope.dataset_id != dataset.dataset_id:
        raise ValidationError(
            f"scope dataset {scope.dataset_id!r} does not match dataset "
            f"{dataset.dataset_id!r}"
        )
    return [r for r in dataset.records if _in_scope(r, scope)]


def generate_pairs(
    dataset: CohortDataset, scope: PairScope | None = None
) -> Iterator[TrialPair]:
    """Stream every in-scope unordered pair exactly once.

    Emission is deterministic: languages in sorted order, then
    lexicographic by (row_a, row_b) within each language. The stream is
    never materialized, so N in the thousands (tens of millions of
    pairs) stays cheap on memory.
    """
    records = scoped_records(dataset, scope)
    if not records:
        raise EmptyScopeError(
            f"scope {scope.text() if scope else '<all>'} selects no samples in "
            f"dataset {dataset.dataset_id!r}"
        )
    by_language: dict[str, list[tuple[int, str]]] = {}
    for rec in records:
        by_language.setdefault(rec.language, []).append(
            (rec.embedding_row, rec.speaker_id)
        )
    same, diff = PairLabel.SAME, PairLabel.DIFFERENT
    for language in sorted(by_language):
        entries = sorted(by_language[language])
        for (row_a, spk_a), (row_b, spk_b) in itertools.combinations(entries, 2):
            yield TrialPair(row_a, row_b, same if spk_a == spk_b else diff)


def pair_rows_csv(
    pairs: Iterable[TrialPair], dataset: CohortDataset
) -> Iterator[tuple[str, str, str]]:
    """Render pairs as (sample_id_a, sample_id_b, label) rows."""
    by_row = {r.embedding_row: r.sample_id for r in dataset.records}
    for p in pairs:
        yield by_row[p.row_a], by_row[p.row_b], p.label.value
