"""Duplicate-enrollment detection via speaker-level score aggregation.

For every unordered speaker pair inside a (dataset, language) scope,
all cross-sample cosine scores are aggregated into a median plus a
fraction-above-threshold vote; a link requires both the vote
(frac_above >= min_frac) and the median to clear the threshold. The
median resists per-sample outliers from short or noisy recordings, and
the vote demands consistent evidence. Suspected duplicates are the
connected components of the link graph: a participant enrolled at
three sites chains into one cluster without needing every pairwise
edge.

The language boundary mirrors the evaluation pipeline; cross-language
linking exists but is marked experimental in reports.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import CohortDataset
from .errors import ValidationError
from .scoring import ScoreTable, score_matrix

DEFAULT_MIN_FRAC = 0.5


@dataclass(frozen=True)
class SpeakerLinkScore:
    """Aggregated evidence for one speaker pair (symmetric in a/b)."""

    speaker_a: str
    speaker_b: str
    median_score: float
    frac_above: float
    pair_count: int
    linked: bool


@dataclass(frozen=True)
class DuplicateReport:
    """Disjoint clusters of speaker ids suspected to be one person."""

    clusters: tuple[tuple[str, ...], ...]
    threshold: float
    policy: Mapping[str, object]
    unclustered: int


def _language_scopes(
    dataset: CohortDataset, language: str | None, cross_language: bool
) -> list[tuple[str, list[int]]]:
    """(scope label, record indices) groups to link within."""
    if cross_language:
        return [("*", list(range(len(dataset.records))))]
    groups: dict[str, list[int]] = {}
    for idx, rec in enumerate(dataset.records):
        if language is not None and rec.language != language:
            continue
        groups.setdefault(rec.language, []).append(idx)
    if language is not None and not groups:
        raise ValidationError(
            f"no samples for language {language!r} in dataset {dataset.dataset_id!r}"
        )
    return sorted(groups.items())


def link_speakers(
    dataset: CohortDataset,
    threshold: float,
    min_frac: float = DEFAULT_MIN_FRAC,
    *,
    language: str | None = None,
    cross_language: bool = False,
) -> list[SpeakerLinkScore]:
    """Score every unordered speaker pair per scope and decide links.

    Raising the threshold or min_frac can only remove links, never add
    them. A single-speaker scope contributes no entries. Thresholds
    outside [-1, 1] are legal and simply link nothing (cosine never
    exceeds 1) or everything the vote allows.
    """
    if not np.isfinite(threshold):
        raise ValidationError(f"threshold must be finite, got {threshold}")
    if not 0.0 < min_frac <= 1.0:
        raise ValidationError(f"min_frac must be in (0, 1], got {min_frac}")
    out: list[SpeakerLinkScore] = []
    for _scope_label, indices in _language_scopes(dataset, language, cross_language):
        by_speaker: dict[str, list[int]] = {}
        for idx in indices:
            rec = dataset.records[idx]
            by_speaker.setdefault(rec.speaker_id, []).append(rec.embedding_row)
        speakers = sorted(by_speaker)
        if len(speakers) < 2:
            continue
        scope_rows = np.array(
            sorted(r for rows in by_speaker.values() for r in rows), dtype=np.int64
        )
        local = {int(r): i for i, r in enumerate(scope_rows)}
        table = score_matrix(_submatrix(dataset, scope_rows))
        for i, spk_a in enumerate(speakers):
            rows_a = np.array([local[r] for r in by_speaker[spk_a]], dtype=np.int64)
            for spk_b in speakers[i + 1 :]:
                rows_b = np.array([local[r] for r in by_speaker[spk_b]], dtype=np.int64)
                scores = _cross_scores(table, rows_a, rows_b)
                median = float(np.median(scores))
                frac = float(np.mean(scores > threshold))
                out.append(
                    SpeakerLinkScore(
                        speaker_a=spk_a,
                        speaker_b=spk_b,
                        median_score=median,
                        frac_above=frac,
                        pair_count=int(scores.size),
                        linked=frac >= min_frac and median > threshold,
                    )
                )
    return out


def _submatrix(dataset: CohortDataset, rows: np.ndarray):
    from .core import EmbeddingMatrix

    return EmbeddingMatrix(dataset.matrix.data[rows], source=dataset.dataset_id)


def _cross_scores(
    table: ScoreTable, rows_a: np.ndarray, rows_b: np.ndarray
) -> np.ndarray:
    ia = np.repeat(rows_a, rows_b.size)
    ib = np.tile(rows_b, rows_a.size)
    lo = np.minimum(ia, ib)
    hi = np.maximum(ia, ib)
    return table.take(lo, hi)


class _UnionFind:
    def __init__(self, items: Iterable[str]):
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def find_duplicate_clusters(
    links: Sequence[SpeakerLinkScore],
    *,
    threshold: float,
    min_frac: float = DEFAULT_MIN_FRAC,
    cross_language: bool = False,
) -> DuplicateReport:
    """Connected components over the linked pairs.

    The speaker universe is everyone appearing in ``links`` (linked or
    not); singletons are excluded from clusters and counted as
    unclustered.
    """
    universe = sorted({s for link in links for s in (link.speaker_a, link.speaker_b)})
    uf = _UnionFind(universe)
    for link in links:
        if link.linked:
            uf.union(link.speaker_a, link.speaker_b)
    components: dict[str, list[str]] = {}
    for spk in universe:
        components.setdefault(uf.find(spk), []).append(spk)
    clusters = tuple(
        tuple(sorted(members))
        for members in sorted(components.values())
        if len(members) >= 2
    )
    policy: dict[str, object] = {
        "aggregation": "median+frac_above",
        "min_frac": min_frac,
        "scope": "cross-language (experimental)" if cross_language else "per-language",
    }
    clustered = sum(len(c) for c in clusters)
    return DuplicateReport(
        clusters=clusters,
        threshold=threshold,
        policy=policy,
        unclustered=len(universe) - clustered,
    )


@dataclass(frozen=True)
class VerificationMatch:
    """One enrolled speaker's evidence against a candidate."""

    speaker_id: str
    link: SpeakerLinkScore
    matched: bool


def verify_enrollment(
    candidate: Sequence[np.ndarray],
    dataset: CohortDataset,
    threshold: float,
    min_frac: float = DEFAULT_MIN_FRAC,
    *,
    language: str | None = None,
    candidate_id: str = "candidate",
) -> list[VerificationMatch]:
    """Score a candidate's vectors against every enrolled speaker.

    Returns one entry per speaker, ranked by median score descending
    (ties broken by speaker id); ``matched`` applies the same
    median-plus-vote policy as :func:`link_speakers`.
    """
    if not candidate:
        raise ValidationError("candidate must provide at least one vector")
    cand = np.asarray([np.asarray(v, dtype=np.float64).ravel() for v in candidate])
    if cand.shape[1] != dataset.matrix.dim:
        raise ValidationError(
            f"candidate dim {cand.shape[1]} does not match matrix dim {dataset.matrix.dim}"
        )
    if not np.isfinite(cand).all():
        raise ValidationError("non-finite value in candidate vectors")
    cand_sq = np.einsum("ij,ij->i", cand, cand)
    if (cand_sq == 0.0).any():
        raise ValidationError("zero-norm candidate vector")

    in_scope = [
        r for r in dataset.records if language is None or r.language == language
    ]
    if not in_scope:
        raise ValidationError(
            f"no enrolled samples in scope language={language!r} "
            f"for dataset {dataset.dataset_id!r}"
        )
    rows = np.array([r.embedding_row for r in in_scope], dtype=np.int64)
    enrolled = dataset.matrix.data[rows].astype(np.float64)
    sq = dataset.matrix.sq_norms[rows]
    gram = cand @ enrolled.T
    gram /= np.sqrt(np.outer(cand_sq, sq))
    np.clip(gram, -1.0, 1.0, out=gram)

    by_speaker: dict[str, list[int]] = {}
    for col, rec in enumerate(in_scope):
        by_speaker.setdefault(rec.speaker_id, []).append(col)
    matches: list[VerificationMatch] = []
    for spk in sorted(by_speaker):
        cols = by_speaker[spk]
        scores = gram[:, cols].ravel()
        median = float(np.median(scores))
        frac = float(np.mean(scores > threshold))
        linked = frac >= min_frac and median > threshold
        matches.append(
            VerificationMatch(
                speaker_id=spk,
                link=SpeakerLinkScore(
                    speaker_a=candidate_id,
                    speaker_b=spk,
                    median_score=median,
                    frac_above=frac,
                    pair_count=int(scores.size),
                    linked=linked,
                ),
                matched=linked,
            )
        )
    matches.sort(key=lambda m: (-m.link.median_score, m.speaker_id))
    return matches


def duplicate_report_csv(
    report: DuplicateReport, links: Sequence[SpeakerLinkScore]
) -> str:
    """Cluster membership CSV with a leading policy summary line.

    ``median_score_to_cluster`` is the median of a member's pairwise
    median scores to the rest of its cluster; ``evidence_pairs`` the
    total cross-sample pair count behind that evidence.
    """
    pair_scores: dict[tuple[str, str], SpeakerLinkScore] = {}
    for link in links:
        key = (link.speaker_a, link.speaker_b)
        pair_scores[key] = link
        pair_scores[(key[1], key[0])] = link
    buf = io.StringIO()
    policy_text = " ".join(f"{k}={v}" for k, v in sorted(report.policy.items()))
    buf.write(f"# threshold={report.threshold!r} {policy_text}\n")
    buf.write("cluster_id,speaker_id,median_score_to_cluster,evidence_pairs\n")
    for cluster_id, members in enumerate(report.clusters):
        for spk in members:
            medians = []
            evidence = 0
            for other in members:
                if other == spk:
                    continue
                link = pair_scores.get((spk, other))
                if link is not None:
                    medians.append(link.median_score)
                    evidence += link.pair_count
            med = float(np.median(medians)) if medians else float("nan")
            buf.write(f"{cluster_id},{spk},{med:.9g},{evidence}\n")
    return buf.getvalue()
