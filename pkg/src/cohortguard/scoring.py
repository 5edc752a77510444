"""Cosine scoring: per-pair, streamed, and blocked all-pairs.

Dot products are accumulated in float64 regardless of the float32
storage, divided by sqrt(|a|^2 * |b|^2) using the precomputed squared
row norms, and clamped into [-1, 1]. Computing the denominator from
squared norms makes cosine(x, x) exactly 1.0 for bit-identical rows
(IEEE sqrt(s*s) == s), which downstream equality tests rely on.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Mapping

import numpy as np

from .core import EmbeddingMatrix
from .errors import ValidationError
from .pairing import PairLabel, PairScope, TrialPair

DEFAULT_CHUNK = 1 << 16
DEFAULT_BLOCK = 256


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1]."""
    va = np.asarray(a, dtype=np.float64).ravel()
    vb = np.asarray(b, dtype=np.float64).ravel()
    if va.shape != vb.shape:
        raise ValidationError(f"dim mismatch: {va.shape[0]} vs {vb.shape[0]}")
    if not (np.isfinite(va).all() and np.isfinite(vb).all()):
        raise ValidationError("non-finite value in input vector")
    sq_a = float(va @ va)
    sq_b = float(vb @ vb)
    if sq_a == 0.0 or sq_b == 0.0:
        raise ValidationError("zero-norm input vector")
    return float(min(1.0, max(-1.0, float(va @ vb) / np.sqrt(sq_a * sq_b))))


class ScoredPairSet:
    """Trial pairs with their cosine scores, in generation order.

    Backed by flat arrays so millions of pairs stay compact; the
    ``pairs`` property materializes :class:`TrialPair` tuples on
    demand. ``provenance`` records how the scores were produced.
    """

    def __init__(
        self,
        row_a: np.ndarray,
        row_b: np.ndarray,
        is_same: np.ndarray,
        scores: np.ndarray,
        scope: PairScope | None = None,
        provenance: Mapping[str, object] | None = None,
    ):
        self.row_a = np.asarray(row_a, dtype=np.int64)
        self.row_b = np.asarray(row_b, dtype=np.int64)
        self.is_same = np.asarray(is_same, dtype=bool)
        self.scores = np.asarray(scores, dtype=np.float64)
        if not (
            len(self.row_a) == len(self.row_b) == len(self.is_same) == len(self.scores)
        ):
            raise ValueError("mismatched array lengths")
        if self.scores.size and not np.isfinite(self.scores).all():
            raise ValidationError("non-finite score")
        self.scope = scope
        self.provenance = dict(provenance or {})
        for arr in (self.row_a, self.row_b, self.is_same, self.scores):
            arr.setflags(write=False)
        self._pairs: tuple[TrialPair, ...] | None = None

    @classmethod
    def from_labeled_scores(
        cls,
        scores: Iterable[float],
        is_same: Iterable[bool],
        scope: PairScope | None = None,
        provenance: Mapping[str, object] | None = None,
    ) -> "ScoredPairSet":
        """Build from pre-scored trials (e.g. an external score dump).

        Row indices are synthesized; scores may lie outside [-1, 1]
        since arbitrary backends and monotone recalibrations are legal
        inputs to the metrics layer.
        """
        s = np.asarray(list(scores), dtype=np.float64)
        lab = np.asarray(list(is_same), dtype=bool)
        n = len(s)
        return cls(
            row_a=np.zeros(n, dtype=np.int64),
            row_b=np.arange(1, n + 1, dtype=np.int64),
            is_same=lab,
            scores=s,
            scope=scope,
            provenance=provenance or {"source": "labeled-scores"},
        )

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def pairs(self) -> tuple[TrialPair, ...]:
        if self._pairs is None:
            same, diff = PairLabel.SAME, PairLabel.DIFFERENT
            self._pairs = tuple(
                TrialPair(int(a), int(b), same if s else diff)
                for a, b, s in zip(self.row_a, self.row_b, self.is_same)
            )
        return self._pairs

    def __iter__(self) -> Iterator[tuple[TrialPair, float]]:
        return zip(self.pairs, (float(s) for s in self.scores))

    @property
    def positive_scores(self) -> np.ndarray:
        return self.scores[self.is_same]

    @property
    def negative_scores(self) -> np.ndarray:
        return self.scores[~self.is_same]

    def positive_count(self) -> int:
        return int(self.is_same.sum())

    def negative_count(self) -> int:
        return int(len(self) - self.is_same.sum())


def _chunked(iterable: Iterable[TrialPair], size: int) -> Iterator[list[TrialPair]]:
    it = iter(iterable)
    while chunk := list(itertools.islice(it, size)):
        yield chunk


def score_pairs(
    pairs: Iterable[TrialPair],
    matrix: EmbeddingMatrix,
    scope: PairScope | None = None,
    chunk_size: int = DEFAULT_CHUNK,
) -> ScoredPairSet:
    """Score a pair stream; output order equals input order.

    Pairs are consumed in fixed-size chunks and scored with a float64
    einsum, so results are bitwise reproducible for a given matrix and
    chunk size regardless of how the caller parallelizes around it.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    wide = matrix.data.astype(np.float64)
    sq = matrix.sq_norms
    n_rows = matrix.row_count
    a_parts: list[np.ndarray] = []
    b_parts: list[np.ndarray] = []
    same_parts: list[np.ndarray] = []
    score_parts: list[np.ndarray] = []
    for chunk in _chunked(pairs, chunk_size):
        ia = np.fromiter((p.row_a for p in chunk), dtype=np.int64, count=len(chunk))
        ib = np.fromiter((p.row_b for p in chunk), dtype=np.int64, count=len(chunk))
        if ia.size and (ia.min() < 0 or max(ia.max(), ib.max()) >= n_rows):
            raise ValidationError(f"pair references a row outside 0..{n_rows - 1}")
        dots = np.einsum("ij,ij->i", wide[ia], wide[ib])
        np.clip(dots / np.sqrt(sq[ia] * sq[ib]), -1.0, 1.0, out=dots)
        a_parts.append(ia)
        b_parts.append(ib)
        same_parts.append(
            np.fromiter(
                (p.label is PairLabel.SAME for p in chunk), dtype=bool, count=len(chunk)
            )
        )
        score_parts.append(dots)
    empty_i = np.empty(0, dtype=np.int64)
    return ScoredPairSet(
        row_a=np.concatenate(a_parts) if a_parts else empty_i,
        row_b=np.concatenate(b_parts) if b_parts else empty_i,
        is_same=np.concatenate(same_parts) if same_parts else np.empty(0, dtype=bool),
        scores=np.concatenate(score_parts) if score_parts else np.empty(0),
        scope=scope,
        provenance={"scorer": "cosine-f64", "chunk_size": chunk_size},
    )


class ScoreTable:
    """Upper-triangular all-pairs cosine table in condensed storage.

    Entry (i, j) with i < j lives at index i*(2n-i-1)/2 + (j-i-1) of a
    flat float64 array of length C(n, 2).
    """

    __slots__ = ("n", "values")

    def __init__(self, n: int, values: np.ndarray):
        self.n = n
        self.values = values

    def _index(self, i: int, j: int) -> int:
        if not 0 <= i < j < self.n:
            raise IndexError(f"need 0 <= i < j < {self.n}, got ({i}, {j})")
        return i * (2 * self.n - i - 1) // 2 + (j - i - 1)

    def get(self, i: int, j: int) -> float:
        if i == j:
            raise IndexError("self-pairs are not stored")
        if i > j:
            i, j = j, i
        return float(self.values[self._index(i, j)])

    def take(self, rows_i: np.ndarray, rows_j: np.ndarray) -> np.ndarray:
        """Vectorized fetch; every (i, j) must satisfy i < j."""
        i = np.asarray(rows_i, dtype=np.int64)
        j = np.asarray(rows_j, dtype=np.int64)
        idx = i * (2 * self.n - i - 1) // 2 + (j - i - 1)
        return self.values[idx]


def score_matrix(matrix: EmbeddingMatrix, block: int = DEFAULT_BLOCK) -> ScoreTable:
    """All-pairs cosine over the matrix rows, blocked for cache locality.

    Produces the identical table (within float64 rounding of the
    underlying GEMM) for any block size >= 1.
    """
    if block < 1:
        raise ValueError("block must be >= 1")
    n = matrix.row_count
    wide = matrix.data.astype(np.float64)
    sq = matrix.sq_norms
    out = np.empty(n * (n - 1) // 2, dtype=np.float64)

    def row_base(i: int) -> int:
        return i * (2 * n - i - 1) // 2 - (i + 1)

    for b0 in range(0, n, block):
        b1 = min(b0 + block, n)
        xa = wide[b0:b1]
        sqa = sq[b0:b1]
        for c0 in range(b0, n, block):
            c1 = min(c0 + block, n)
            gram = xa @ wide[c0:c1].T
            gram /= np.sqrt(np.outer(sqa, sq[c0:c1]))
            np.clip(gram, -1.0, 1.0, out=gram)
            for local_i, i in enumerate(range(b0, b1)):
                j_lo = max(c0, i + 1)
                if j_lo >= c1:
                    continue
                base = row_base(i)
                out[base + j_lo : base + c1] = gram[local_i, j_lo - c0 : c1 - c0]
    out.setflags(write=False)
    return ScoreTable(n, out)
