"""Stratified benchmarks, balanced subsampling, and report rendering.

A benchmark run stratifies each dataset by any of language / task /
model_tag, optionally balances every stratum to a fixed speaker count,
then runs the pair -> score -> EER pipeline per stratum and verifies
the emitted pair counts against the closed-form plan. Strata that
cannot support EER (fewer than two speakers, or no positive pairs)
degrade to rows marked undefined instead of failing the batch.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import CohortDataset, bind_dataset, cohort_stats
from .errors import UnknownLanguageError, ValidationError
from .metrics import calibrate_threshold, eer, format_tpr_tnr, rates_at_threshold
from .pairing import generate_pairs, plan_pairs
from .scoring import score_pairs

STRATA_KEYS = ("language", "task", "model_tag")

SUBSAMPLE_ALGORITHM = "numpy-default-rng-pcg64-choice-noreplace"

# eLinguistics-style proximity between the studied languages: lower is
# closer, symmetric, zero on the diagonal. Annotation data only; never
# feeds any computation.
LANGUAGE_PROXIMITY: dict[tuple[str, str], float] = {
    ("en", "de"): 31.3,
    ("en", "da"): 24.6,
    ("en", "es"): 59.3,
    ("en", "ar"): 85.5,
    ("de", "da"): 28.3,
    ("de", "es"): 56.8,
    ("de", "ar"): 76.3,
    ("da", "es"): 51.4,
    ("da", "ar"): 84.9,
    ("es", "ar"): 76.6,
}

PROXIMITY_LANGUAGES = ("ar", "da", "de", "en", "es")


def language_proximity(l1: str, l2: str) -> float:
    """Symmetric proximity lookup; 0.0 for a language with itself."""
    for code in (l1, l2):
        if code not in PROXIMITY_LANGUAGES:
            raise UnknownLanguageError(
                f"language {code!r} not in proximity table {PROXIMITY_LANGUAGES}"
            )
    if l1 == l2:
        return 0.0
    value = LANGUAGE_PROXIMITY.get((l1, l2))
    return LANGUAGE_PROXIMITY[(l2, l1)] if value is None else value


StratumLabel = tuple[tuple[str, str], ...]


def _label_text(label: StratumLabel) -> str:
    return ";".join(f"{k}={v}" for k, v in label)


def stratify(
    dataset: CohortDataset, keys: Sequence[str]
) -> list[tuple[StratumLabel, CohortDataset]]:
    """Partition records by the given keys; empty strata are omitted.

    Sub-datasets share the parent matrix (their unreferenced rows are
    expected), and strata are returned sorted by label.
    """
    keys = tuple(keys)
    if not keys:
        raise ValidationError("strata keys must be nonempty")
    unknown = set(keys) - set(STRATA_KEYS)
    if unknown:
        raise ValidationError(f"unknown strata keys {sorted(unknown)}; valid: {STRATA_KEYS}")
    groups: dict[StratumLabel, list] = {}
    for rec in dataset.records:
        label = tuple(
            (key, getattr(rec, key) or "untagged") for key in keys
        )
        groups.setdefault(label, []).append(rec)
    out = []
    for label in sorted(groups):
        sub = bind_dataset(
            groups[label],
            dataset.matrix,
            f"{dataset.dataset_id}[{_label_text(label)}]",
            on_unreferenced="ignore",
        )
        out.append((label, sub))
    return out


def _choose_speakers(
    speakers: Sequence[str], target: int, seed: int
) -> frozenset[str]:
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(speakers), size=target, replace=False)
    return frozenset(speakers[int(i)] for i in idx)


def balanced_subsample(
    dataset: CohortDataset, target_speakers: int, seed: int
) -> CohortDataset:
    """Uniformly pick target_speakers speakers, keeping all their samples.

    Deterministic for a fixed seed (generator: ``SUBSAMPLE_ALGORITHM``);
    a no-op when the target equals the current speaker count.
    """
    if target_speakers < 2:
        raise ValidationError(f"target_speakers must be >= 2, got {target_speakers}")
    speakers = dataset.speakers
    if len(speakers) < target_speakers:
        raise ValidationError(
            f"dataset {dataset.dataset_id!r} has {len(speakers)} speakers, "
            f"cannot balance to {target_speakers}"
        )
    if len(speakers) == target_speakers:
        return dataset
    chosen = _choose_speakers(speakers, target_speakers, seed)
    records = [r for r in dataset.records if r.speaker_id in chosen]
    return bind_dataset(
        records,
        dataset.matrix,
        f"{dataset.dataset_id}#bal{target_speakers}s{seed}",
        on_unreferenced="ignore",
    )


@dataclass(frozen=True)
class BalanceSpec:
    target_speakers: int
    seed: int

    def __post_init__(self) -> None:
        if self.target_speakers < 2:
            raise ValidationError("balance target_speakers must be >= 2")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValidationError("balance seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class BenchmarkConfig:
    strata_keys: tuple[str, ...] = ("language",)
    balance: BalanceSpec | None = None
    threshold_policy: str = "eer_point"
    threshold_target: float | None = None
    annotate_proximity: bool = True
    threads: int = 1


@dataclass(frozen=True)
class BenchmarkRow:
    dataset_id: str
    label: StratumLabel
    n_speakers: int
    n_samples: int
    avg_samples_per_speaker: float
    std_samples_per_speaker: float
    n_pos: int
    n_neg: int
    eer_pct: float | None
    threshold: float | None
    tpr: float | None
    tnr: float | None
    status: str  # "ok" or "undefined:<reason>"


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple[BenchmarkRow, ...]
    config: BenchmarkConfig
    proximity_annotations: tuple[tuple[str, str, float], ...] = ()
    provenance: Mapping[str, object] = field(default_factory=dict)


def _evaluate_stratum(
    dataset_id: str, label: StratumLabel, sub: CohortDataset, config: BenchmarkConfig
) -> BenchmarkRow:
    stats = cohort_stats(sub)
    plan = plan_pairs(stats)

    def row(status: str, eer_pct=None, threshold=None, tpr=None, tnr=None):
        return BenchmarkRow(
            dataset_id=dataset_id,
            label=label,
            n_speakers=stats.speaker_count,
            n_samples=stats.total_samples,
            avg_samples_per_speaker=stats.avg_samples_per_speaker,
            std_samples_per_speaker=stats.std_samples_per_speaker,
            n_pos=plan.positive_count,
            n_neg=plan.negative_count,
            eer_pct=eer_pct,
            threshold=threshold,
            tpr=tpr,
            tnr=tnr,
            status=status,
        )

    if plan.positive_count == 0:
        return row("undefined:no_positive_pairs")
    if plan.negative_count == 0:
        return row("undefined:no_negative_pairs")
    scored = score_pairs(generate_pairs(sub), sub.matrix)
    emitted = (scored.positive_count(), scored.negative_count())
    if emitted != (plan.positive_count, plan.negative_count):
        raise AssertionError(
            f"stratum {_label_text(label)}: emitted pair counts {emitted} "
            f"disagree with plan {(plan.positive_count, plan.negative_count)}"
        )
    result = eer(scored)
    threshold = (
        result.threshold
        if config.threshold_policy == "eer_point"
        else calibrate_threshold(scored, config.threshold_policy, config.threshold_target)
    )
    tpr, tnr = rates_at_threshold(scored, threshold)
    return row("ok", eer_pct=result.eer * 100.0, threshold=threshold, tpr=tpr, tnr=tnr)


def run_benchmark(
    datasets: Sequence[CohortDataset], config: BenchmarkConfig
) -> BenchmarkReport:
    """Evaluate every stratum of every dataset; deterministic output.

    When balancing with model_tag among the strata keys, the speaker
    subsample is chosen once per stratum-without-model_tag group so all
    model tags are compared on the identical speaker set.
    """
    jobs: list[tuple[str, StratumLabel, CohortDataset]] = []
    undefined_rows: list[BenchmarkRow] = []
    for dataset in datasets:
        strata = stratify(dataset, config.strata_keys)
        if config.balance is None:
            jobs.extend((dataset.dataset_id, label, sub) for label, sub in strata)
            continue
        groups: dict[StratumLabel, list[tuple[StratumLabel, CohortDataset]]] = {}
        for label, sub in strata:
            group_key = tuple(kv for kv in label if kv[0] != "model_tag")
            groups.setdefault(group_key, []).append((label, sub))
        for group_key in sorted(groups):
            members = groups[group_key]
            speakers = sorted({s for _, sub in members for s in sub.speakers})
            if len(speakers) < config.balance.target_speakers:
                for label, sub in members:
                    stats = cohort_stats(sub)
                    plan = plan_pairs(stats)
                    undefined_rows.append(
                        BenchmarkRow(
                            dataset_id=dataset.dataset_id,
                            label=label,
                            n_speakers=stats.speaker_count,
                            n_samples=stats.total_samples,
                            avg_samples_per_speaker=stats.avg_samples_per_speaker,
                            std_samples_per_speaker=stats.std_samples_per_speaker,
                            n_pos=plan.positive_count,
                            n_neg=plan.negative_count,
                            eer_pct=None,
                            threshold=None,
                            tpr=None,
                            tnr=None,
                            status="undefined:too_few_speakers_to_balance",
                        )
                    )
                continue
            if len(speakers) == config.balance.target_speakers:
                chosen = frozenset(speakers)
            else:
                chosen = _choose_speakers(
                    speakers, config.balance.target_speakers, config.balance.seed
                )
            for label, sub in members:
                records = [r for r in sub.records if r.speaker_id in chosen]
                balanced = bind_dataset(
                    records,
                    sub.matrix,
                    f"{sub.dataset_id}#bal{config.balance.target_speakers}"
                    f"s{config.balance.seed}",
                    on_unreferenced="ignore",
                )
                jobs.append((dataset.dataset_id, label, balanced))

    if config.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(
                pool.map(lambda j: _evaluate_stratum(j[0], j[1], j[2], config), jobs)
            )
    else:
        rows = [_evaluate_stratum(d, label, sub, config) for d, label, sub in jobs]
    rows.extend(undefined_rows)
    rows.sort(key=lambda r: (r.dataset_id, _label_text(r.label)))

    annotations: tuple[tuple[str, str, float], ...] = ()
    if config.annotate_proximity and "language" in config.strata_keys:
        langs = sorted(
            {
                v
                for r in rows
                for k, v in r.label
                if k == "language" and v in PROXIMITY_LANGUAGES
            }
        )
        annotations = tuple(
            (a, b, language_proximity(a, b))
            for i, a in enumerate(langs)
            for b in langs[i + 1 :]
        )

    provenance: dict[str, object] = {"threshold_policy": config.threshold_policy}
    if config.threshold_target is not None:
        provenance["threshold_target"] = config.threshold_target
    if config.balance is not None:
        provenance.update(
            {
                "subsample_algorithm": SUBSAMPLE_ALGORITHM,
                "balance_target_speakers": config.balance.target_speakers,
                "balance_seed": config.balance.seed,
            }
        )
    return BenchmarkReport(
        rows=tuple(rows),
        config=config,
        proximity_annotations=annotations,
        provenance=provenance,
    )


def report_to_csv(report: BenchmarkReport) -> str:
    """CSV rows plus '#' comment trailers for provenance and proximity."""
    keys = report.config.strata_keys
    header = (
        ["dataset"]
        + list(keys)
        + [
            "n_speakers",
            "n_samples",
            "avg_samples_per_speaker",
            "n_pos",
            "n_neg",
            "eer_pct",
            "threshold",
            "tpr",
            "tnr",
            "status",
        ]
    )
    lines = [",".join(header)]
    for r in report.rows:
        label = dict(r.label)
        cells = [r.dataset_id] + [label.get(k, "") for k in keys]
        cells += [
            str(r.n_speakers),
            str(r.n_samples),
            f"{r.avg_samples_per_speaker:.2f}±{r.std_samples_per_speaker:.2f}",
            str(r.n_pos),
            str(r.n_neg),
            "" if r.eer_pct is None else f"{r.eer_pct:.2f}",
            "" if r.threshold is None else repr(r.threshold),
            "" if r.tpr is None else repr(r.tpr),
            "" if r.tnr is None else repr(r.tnr),
            r.status,
        ]
        lines.append(",".join(cells))
    for key in sorted(report.provenance):
        lines.append(f"# {key}={report.provenance[key]}")
    for a, b, value in report.proximity_annotations:
        lines.append(f"# proximity {a}-{b} {value}")
    return "\n".join(lines) + "\n"


def report_to_text(report: BenchmarkReport) -> str:
    """Aligned table with the joint three-decimal ``TPR | TNR`` column."""
    keys = report.config.strata_keys
    header = (
        ["Dataset"]
        + [k.replace("_", " ").title() for k in keys]
        + ["EER(%)", "TPR | TNR", "#Spkrs", "#Smpls", "Avg #Smpls per Spkr"]
    )
    table = [header]
    for r in report.rows:
        label = dict(r.label)
        table.append(
            [r.dataset_id]
            + [label.get(k, "") for k in keys]
            + [
                "undef" if r.eer_pct is None else f"{r.eer_pct:.2f}",
                "undef" if r.tpr is None else format_tpr_tnr(r.tpr, r.tnr),
                str(r.n_speakers),
                str(r.n_samples),
                f"{r.avg_samples_per_speaker:.2f} ± {r.std_samples_per_speaker:.2f}",
            ]
        )
    widths = [max(len(row[c]) for row in table) for c in range(len(header))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    pivot = _pivot_text(report)
    if pivot:
        lines.append("")
        lines.extend(pivot)
    if report.proximity_annotations:
        lines.append("")
        lines.append("Language proximity (lower is closer):")
        for a, b, value in report.proximity_annotations:
            lines.append(f"  {a}-{b}: {value}")
    return "\n".join(lines) + "\n"


def _pivot_text(report: BenchmarkReport) -> list[str]:
    """EER% grid with one column per language, one row per model tag."""
    keys = set(report.config.strata_keys)
    if not {"language", "model_tag"} <= keys:
        return []
    cells: dict[tuple[str, str], str] = {}
    models: set[str] = set()
    langs: set[str] = set()
    for r in report.rows:
        label = dict(r.label)
        model, lang = label["model_tag"], label["language"]
        models.add(model)
        langs.add(lang)
        cells[(model, lang)] = "undef" if r.eer_pct is None else f"{r.eer_pct:.2f}"
    model_list, lang_list = sorted(models), sorted(langs)
    header = ["Model"] + [f"{l} EER(%)" for l in lang_list]
    table = [header]
    for model in model_list:
        table.append([model] + [cells.get((model, l), "-") for l in lang_list])
    widths = [max(len(row[c]) for row in table) for c in range(len(header))]
    out = []
    for i, row in enumerate(table):
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            out.append("  ".join("-" * w for w in widths))
    return out
