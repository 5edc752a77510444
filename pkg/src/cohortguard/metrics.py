"""Threshold sweep, EER, DET curve, and threshold calibration.

The decision rule everywhere is strictly-greater: a pair is accepted as
same-speaker iff its score is ABOVE the threshold; ties at the
threshold are rejected. Rates are exact integer-count ratios, so every
metric is invariant to pair order and to any strictly increasing
transform of the scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import CalibrationError, UndefinedMetricError
from .scoring import ScoredPairSet


@dataclass(frozen=True)
class SweepPoint:
    """Operating rates at one candidate threshold."""

    threshold: float
    tpr: float
    tnr: float
    fpr: float
    fnr: float


@dataclass(frozen=True)
class EERResult:
    """The balance point where false-positive and false-negative rates meet.

    ``interpolated`` is True when the rates never cross exactly at a
    candidate threshold and the point is a linear interpolation between
    the two adjacent sweep points.
    """

    eer: float
    threshold: float
    tpr_at: float
    tnr_at: float
    interpolated: bool


@dataclass(frozen=True)
class DETCurve:
    points: tuple[tuple[float, float], ...]  # (fpr, fnr), threshold-ascending


def _class_scores(scored: ScoredPairSet) -> tuple[np.ndarray, np.ndarray]:
    pos = np.sort(scored.positive_scores)
    neg = np.sort(scored.negative_scores)
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError(
            f"EER needs both classes: {pos.size} positive and {neg.size} negative pairs"
        )
    return pos, neg


def _sweep_arrays(
    pos: np.ndarray, neg: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Candidate thresholds with (tpr, tnr, fpr, fnr) at each.

    Candidates are the distinct scores plus one sentinel below the
    minimum (accept everything) and one above the maximum (reject
    everything). Every rate is its own integer count divided once, so
    rationally equal rates compare equal in floats too; deriving fnr as
    1-tpr would break exact crossing detection by an ulp.
    """
    uniq = np.unique(np.concatenate([pos, neg]))
    # sentinels must be strictly outside the score range even when the
    # scores are too large in magnitude for +-1.0 to move them
    lo = min(uniq[0] - 1.0, np.nextafter(uniq[0], -np.inf))
    hi = max(uniq[-1] + 1.0, np.nextafter(uniq[-1], np.inf))
    thresholds = np.concatenate([[lo], uniq, [hi]])
    # count strictly-greater via right bisection on the sorted class scores
    pos_gt = pos.size - np.searchsorted(pos, thresholds, side="right")
    neg_gt = neg.size - np.searchsorted(neg, thresholds, side="right")
    tpr = pos_gt / pos.size
    fnr = (pos.size - pos_gt) / pos.size
    fpr = neg_gt / neg.size
    tnr = (neg.size - neg_gt) / neg.size
    return thresholds, tpr, tnr, fpr, fnr


def sweep(scored: ScoredPairSet) -> list[SweepPoint]:
    """One point per candidate threshold, threshold-ascending."""
    pos, neg = _class_scores(scored)
    thresholds, tpr, tnr, fpr, fnr = _sweep_arrays(pos, neg)
    return [
        SweepPoint(
            threshold=float(t),
            tpr=float(a),
            tnr=float(b),
            fpr=float(c),
            fnr=float(d),
        )
        for t, a, b, c, d in zip(thresholds, tpr, tnr, fpr, fnr)
    ]


def eer(scored: ScoredPairSet) -> EERResult:
    """Find the threshold where FPR and FNR balance.

    FPR - FNR is non-increasing along the sweep, from +1 at the low
    sentinel to -1 at the high sentinel. If it hits zero exactly, the
    reported threshold is the midpoint of the interval of thresholds
    achieving it (for perfectly separable scores this is the midpoint
    of the gap between the top negative and bottom positive score,
    maximizing deployment margin). Otherwise the crossing is linearly
    interpolated between the two adjacent sweep points.
    """
    pos, neg = _class_scores(scored)
    thresholds, tpr, tnr, fpr, fnr = _sweep_arrays(pos, neg)
    diff = fpr - fnr
    zeros = np.nonzero(diff == 0.0)[0]
    if zeros.size:
        first, last = int(zeros[0]), int(zeros[-1])
        # rates are constant on [t_k, t_{k+1}), so the achieving interval
        # runs from the first zero threshold to the one after the last
        threshold = (thresholds[first] + thresholds[last + 1]) / 2.0
        return EERResult(
            eer=float(fpr[first]),
            threshold=float(threshold),
            tpr_at=float(tpr[first]),
            tnr_at=float(tnr[first]),
            interpolated=False,
        )
    k = int(np.nonzero(diff > 0.0)[0][-1])
    alpha = diff[k] / (diff[k] - diff[k + 1])
    fpr_x = (1.0 - alpha) * fpr[k] + alpha * fpr[k + 1]
    fnr_x = (1.0 - alpha) * fnr[k] + alpha * fnr[k + 1]
    return EERResult(
        eer=float(0.5 * (fpr_x + fnr_x)),
        threshold=float((1.0 - alpha) * thresholds[k] + alpha * thresholds[k + 1]),
        tpr_at=float((1.0 - alpha) * tpr[k] + alpha * tpr[k + 1]),
        tnr_at=float((1.0 - alpha) * tnr[k] + alpha * tnr[k + 1]),
        interpolated=True,
    )


def det_curve(scored: ScoredPairSet, max_points: int = 200) -> DETCurve:
    """Monotone (fpr, fnr) staircase, downsampled to at most max_points.

    Every emitted point is an actual sweep point; the endpoints and the
    two points bracketing the EER crossing always survive downsampling.
    """
    if max_points < 1:
        raise ValueError("max_points must be >= 1")
    pos, neg = _class_scores(scored)
    thresholds, _tpr, _tnr, fpr, fnr = _sweep_arrays(pos, neg)
    diff = fpr - fnr
    n = thresholds.size
    if n <= max_points:
        keep = np.arange(n)
    else:
        zeros = np.nonzero(diff == 0.0)[0]
        if zeros.size:
            near = [int(zeros[0]), int(zeros[-1])]
        else:
            k = int(np.nonzero(diff > 0.0)[0][-1])
            near = [k, k + 1]
        mandatory = [0, n - 1] + near
        seen: set[int] = set()
        priority: list[int] = []
        for idx in mandatory:
            if idx not in seen:
                seen.add(idx)
                priority.append(idx)
        priority = priority[:max_points]
        budget = max_points - len(priority)
        filler = np.linspace(0, n - 1, num=budget + len(priority), dtype=np.int64)
        chosen = set(priority)
        for idx in filler:
            if len(chosen) >= max_points:
                break
            chosen.add(int(idx))
        keep = np.array(sorted(chosen), dtype=np.int64)
    points = tuple((float(fpr[i]), float(fnr[i])) for i in keep)
    return DETCurve(points=points)


def rates_at_threshold(scored: ScoredPairSet, threshold: float) -> tuple[float, float]:
    """(TPR, TNR) at a threshold, exact count ratios, strict-greater rule."""
    pos, neg = _class_scores(scored)
    tpr = float((pos.size - np.searchsorted(pos, threshold, side="right")) / pos.size)
    tnr = float(np.searchsorted(neg, threshold, side="right") / neg.size)
    return tpr, tnr


def format_tpr_tnr(tpr: float, tnr: float) -> str:
    """Three-decimal ``TPR | TNR`` cell, e.g. ``1.000 | 0.990``."""
    return f"{tpr:.3f} | {tnr:.3f}"


POLICIES = ("eer_point", "target_fpr", "target_fnr")


def calibrate_threshold(
    scored: ScoredPairSet, policy: str = "eer_point", target: float | None = None
) -> float:
    """Pick an operating threshold.

    ``eer_point`` returns the EER balance threshold. ``target_fpr``
    returns the smallest threshold whose FPR does not exceed the
    target; ``target_fnr`` the largest threshold whose FNR does not
    exceed it (the conservative side of each target). Targets below the
    1/class-count granularity of the data are rejected with the
    achievable bound.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}, expected one of {POLICIES}")
    if policy == "eer_point":
        return eer(scored).threshold
    if target is None or not 0.0 < target < 1.0:
        raise ValueError(f"{policy} needs a target in (0, 1), got {target}")
    pos, neg = _class_scores(scored)
    thresholds, tpr, tnr, fpr, fnr = _sweep_arrays(pos, neg)
    if policy == "target_fpr":
        granularity = 1.0 / neg.size
        if target < granularity:
            raise CalibrationError(
                f"target FPR {target} is below the achievable granularity "
                f"1/{neg.size} = {granularity:.6g}",
                achievable=granularity,
            )
        ok = np.nonzero(fpr <= target)[0]
        return float(thresholds[ok[0]])
    granularity = 1.0 / pos.size
    if target < granularity:
        raise CalibrationError(
            f"target FNR {target} is below the achievable granularity "
            f"1/{pos.size} = {granularity:.6g}",
            achievable=granularity,
        )
    ok = np.nonzero(fnr <= target)[0]
    return float(thresholds[ok[-1]])


@dataclass(frozen=True)
class MetricsRow:
    """One line of the metrics report CSV."""

    scope: str
    n_pos: int
    n_neg: int
    eer_pct: float
    threshold: float
    tpr: float
    tnr: float
    interpolated: bool


METRICS_CSV_HEADER = "scope,n_pos,n_neg,eer_pct,threshold,tpr,tnr,interpolated"


def metrics_row(scored: ScoredPairSet, scope_text: str) -> MetricsRow:
    result = eer(scored)
    tpr, tnr = rates_at_threshold(scored, result.threshold)
    return MetricsRow(
        scope=scope_text,
        n_pos=scored.positive_count(),
        n_neg=scored.negative_count(),
        eer_pct=result.eer * 100.0,
        threshold=result.threshold,
        tpr=tpr,
        tnr=tnr,
        interpolated=result.interpolated,
    )


def metrics_report_csv(rows: Iterable[MetricsRow]) -> str:
    """Render rows with EER% at two decimals, one row per scope."""
    lines = [METRICS_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.scope},{r.n_pos},{r.n_neg},{r.eer_pct:.2f},{r.threshold!r},"
            f"{r.tpr!r},{r.tnr!r},{str(r.interpolated).lower()}"
        )
    return "\n".join(lines) + "\n"
