"""Command-line surface.

    cohortguard <validate|stats|pairs|eval|det|calibrate|dedup|balance|synth> [flags]

Conventions: long-form kebab-case flags only; every randomized command
takes an explicit --seed (reproducibility is the product, so there is
no wall-clock seeding); identical inputs and flags always produce
byte-identical outputs. Reports go to --out or stdout; diagnostics go
to stderr, never mixed into the data stream.

Exit codes: 0 success, 1 validation error, 2 undefined metric,
3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    CohortDataset,
    bind_dataset,
    cohort_stats,
    collect_manifest_diagnostics,
    load_embeddings,
    load_manifest,
    write_embeddings,
    write_manifest,
    EmbeddingMatrix,
)
from .dedup import (
    DEFAULT_MIN_FRAC,
    duplicate_report_csv,
    find_duplicate_clusters,
    link_speakers,
)
from .errors import (
    CohortGuardError,
    FormatError,
    UndefinedMetricError,
    ValidationError,
)
from .harness import (
    BalanceSpec,
    BenchmarkConfig,
    SUBSAMPLE_ALGORITHM,
    balanced_subsample,
    report_to_csv,
    report_to_text,
    run_benchmark,
)
from .metrics import (
    METRICS_CSV_HEADER,
    MetricsRow,
    calibrate_threshold,
    det_curve,
    eer,
    rates_at_threshold,
)
from .pairing import PairLabel, PairScope, generate_pairs, pair_rows_csv
from .scoring import ScoredPairSet, score_pairs
from .synth import (
    SynthSpec,
    generate_cohort,
    write_fixture,
    write_fixture_metadata,
    write_ground_truth,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_UNDEFINED = 2
EXIT_IO = 3


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _exit_code_for(exc: Exception) -> int:
    if isinstance(exc, FormatError):
        return EXIT_IO
    if isinstance(exc, UndefinedMetricError):
        return EXIT_UNDEFINED
    if isinstance(exc, ValidationError):
        return EXIT_VALIDATION
    if isinstance(exc, OSError):
        return EXIT_IO
    raise exc


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_dataset(
    manifest: str, embeddings: str, on_unreferenced: str = "warn"
) -> CohortDataset:
    records = load_manifest(manifest)
    matrix = load_embeddings(embeddings)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        dataset = bind_dataset(
            records, matrix, Path(manifest).stem, on_unreferenced=on_unreferenced
        )
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return dataset


def _scope(dataset: CohortDataset, language: str | None, task: str | None):
    if language is None and task is None:
        return None
    return PairScope(dataset_id=dataset.dataset_id, language=language, task=task)


# ---------------------------------------------------------------- validate


def cmd_validate(args: argparse.Namespace) -> int:
    records, format_errors, validation_errors = collect_manifest_diagnostics(
        args.manifest
    )
    matrix = None
    try:
        matrix = load_embeddings(args.embeddings)
    except FormatError as exc:
        format_errors.append(str(exc))
    except ValidationError as exc:
        validation_errors.append(str(exc))

    if matrix is not None and not format_errors and not validation_errors:
        mode = "error" if args.strict_unreferenced else "warn"
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                dataset = bind_dataset(
                    records, matrix, Path(args.manifest).stem, on_unreferenced=mode
                )
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
        except ValidationError as exc:
            validation_errors.append(str(exc))
        else:
            stats = cohort_stats(dataset)
            print(
                f"ok: speakers={stats.speaker_count} samples={stats.total_samples} "
                f"dim={matrix.dim}",
                file=sys.stderr,
            )
            return EXIT_OK

    for msg in format_errors + validation_errors:
        print(f"error: {msg}", file=sys.stderr)
    return EXIT_IO if format_errors else EXIT_VALIDATION


# ---------------------------------------------------------------- stats


def cmd_stats(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.manifest, args.embeddings)
    scopes: list[tuple[str, CohortDataset]] = [(dataset.dataset_id, dataset)]
    for language in dataset.languages:
        records = [r for r in dataset.records if r.language == language]
        scopes.append(
            (
                f"{dataset.dataset_id}/{language}",
                bind_dataset(
                    records,
                    dataset.matrix,
                    f"{dataset.dataset_id}/{language}",
                    on_unreferenced="ignore",
                ),
            )
        )
    rows = []
    for scope_text, sub in scopes:
        s = cohort_stats(sub)
        rows.append(
            (
                scope_text,
                s.speaker_count,
                s.total_samples,
                s.samples_per_speaker_display,
                f"{s.avg_audio_duration_sec:.2f}",
                f"{s.avg_speech_duration_sec:.2f}",
            )
        )
    if args.format == "csv":
        lines = ["scope,n_speakers,n_samples,avg_samples_per_speaker,avg_audio_sec,avg_speech_sec"]
        lines += [",".join(str(c) for c in row) for row in rows]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        header = ["Scope", "#Spkrs", "#Smpls", "Avg #Smpls per Spkr", "Avg Audio (s)", "Avg Speech (s)"]
        table = [header] + [[str(c) for c in row] for row in rows]
        widths = [max(len(r[c]) for r in table) for c in range(len(header))]
        lines = []
        for i, row in enumerate(table):
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------- pairs


def cmd_pairs(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.manifest, args.embeddings)
    scope = _scope(dataset, args.language, args.task)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if args.with_scores:
        scored = score_pairs(generate_pairs(dataset, scope), dataset.matrix, scope)
        writer.writerow(["sample_id_a", "sample_id_b", "label", "score"])
        by_row = {r.embedding_row: r.sample_id for r in dataset.records}
        for (row_a, row_b, label), score in zip(
            zip(scored.row_a, scored.row_b, scored.is_same), scored.scores
        ):
            writer.writerow(
                [
                    by_row[int(row_a)],
                    by_row[int(row_b)],
                    (PairLabel.SAME if label else PairLabel.DIFFERENT).value,
                    f"{score:.9g}",
                ]
            )
    else:
        writer.writerow(["sample_id_a", "sample_id_b", "label"])
        for cells in pair_rows_csv(generate_pairs(dataset, scope), dataset):
            writer.writerow(cells)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- eval


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.manifest, args.embeddings)
    keys = tuple(k.strip() for k in args.group_by.split(",") if k.strip())
    balance = None
    if args.balance_speakers is not None:
        if args.seed is None:
            return _fail("--balance-speakers requires --seed", EXIT_VALIDATION)
        balance = BalanceSpec(target_speakers=args.balance_speakers, seed=args.seed)
    config = BenchmarkConfig(
        strata_keys=keys,
        balance=balance,
        threshold_policy=args.threshold_policy,
        threshold_target=args.target,
        annotate_proximity=not args.no_proximity,
        threads=args.threads,
    )
    report = run_benchmark([dataset], config)
    text = report_to_csv(report) if args.format == "csv" else report_to_text(report)
    _emit(text, args.out)
    if all(row.status != "ok" for row in report.rows):
        print("error: every stratum has undefined metrics", file=sys.stderr)
        return EXIT_UNDEFINED
    return EXIT_OK


# ---------------------------------------------------------------- det


def cmd_det(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.manifest, args.embeddings)
    scope = _scope(dataset, args.language, args.task)
    scored = score_pairs(generate_pairs(dataset, scope), dataset.matrix, scope)
    curve = det_curve(scored, max_points=args.max_points)
    lines = ["fpr,fnr"] + [f"{fpr!r},{fnr!r}" for fpr, fnr in curve.points]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------- calibrate


def cmd_calibrate(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.manifest, args.embeddings)
    languages = [args.language] if args.language else list(dataset.languages)
    rows: list[MetricsRow] = []
    for language in languages:
        scope = PairScope(dataset_id=dataset.dataset_id, language=language)
        scored = score_pairs(generate_pairs(dataset, scope), dataset.matrix, scope)
        result = eer(scored)
        threshold = calibrate_threshold(scored, args.policy, args.target)
        tpr, tnr = rates_at_threshold(scored, threshold)
        rows.append(
            MetricsRow(
                scope=scope.text(),
                n_pos=scored.positive_count(),
                n_neg=scored.negative_count(),
                eer_pct=result.eer * 100.0,
                threshold=threshold,
                tpr=tpr,
                tnr=tnr,
                interpolated=result.interpolated,
            )
        )
    lines = [METRICS_CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.scope},{r.n_pos},{r.n_neg},{r.eer_pct:.2f},{r.threshold!r},"
            f"{r.tpr!r},{r.tnr!r},{str(r.interpolated).lower()}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------- dedup


def _threshold_from_scored_csv(path: str) -> float:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: cannot read scored pairs: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"label", "score"} <= set(reader.fieldnames):
        raise FormatError(f"{path}: expected CSV with at least label,score columns")
    scores: list[float] = []
    labels: list[bool] = []
    for line_no, row in enumerate(reader, start=2):
        label = row["label"]
        if label not in (PairLabel.SAME.value, PairLabel.DIFFERENT.value):
            raise FormatError(f"{path}:{line_no}: unknown label {label!r}")
        try:
            scores.append(float(row["score"]))
        except ValueError as exc:
            raise FormatError(f"{path}:{line_no}: bad score {row['score']!r}") from exc
        labels.append(label == PairLabel.SAME.value)
    scored = ScoredPairSet.from_labeled_scores(scores, labels)
    return eer(scored).threshold


def cmd_dedup(args: argparse.Namespace) -> int:
    if (args.threshold is None) == (args.calibrate_from is None):
        return _fail(
            "exactly one of --threshold or --calibrate-from is required",
            EXIT_VALIDATION,
        )
    dataset = _load_dataset(args.manifest, args.embeddings)
    if args.calibrate_from is not None:
        threshold = _threshold_from_scored_csv(args.calibrate_from)
        print(f"calibrated threshold: {threshold!r}", file=sys.stderr)
    else:
        threshold = args.threshold
    links = link_speakers(
        dataset,
        threshold,
        args.min_frac,
        language=args.language,
        cross_language=args.cross_language,
    )
    report = find_duplicate_clusters(
        links,
        threshold=threshold,
        min_frac=args.min_frac,
        cross_language=args.cross_language,
    )
    _emit(duplicate_report_csv(report, links), args.out)
    print(
        f"clusters={len(report.clusters)} unclustered={report.unclustered}",
        file=sys.stderr,
    )
    return EXIT_OK


# ---------------------------------------------------------------- balance


def cmd_balance(args: argparse.Namespace) -> int:
    dataset = _load_dataset(args.manifest, args.embeddings)
    sub = balanced_subsample(dataset, args.target_speakers, args.seed)
    if args.out_embeddings is not None:
        rows = np.array([r.embedding_row for r in sub.records], dtype=np.int64)
        compact = EmbeddingMatrix(sub.matrix.data[rows])
        renumbered = [
            dataclasses.replace(r, embedding_row=i) for i, r in enumerate(sub.records)
        ]
        write_manifest(renumbered, args.out)
        write_embeddings(compact, args.out_embeddings)
    else:
        write_manifest(sub.records, args.out)
    print(
        f"balanced to {args.target_speakers} speakers "
        f"({len(sub.records)} samples) via {SUBSAMPLE_ALGORITHM} seed={args.seed}",
        file=sys.stderr,
    )
    return EXIT_OK


# ---------------------------------------------------------------- synth


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        spec_text = Path(args.spec).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{args.spec}: cannot read synth spec: {exc}") from exc
    spec = SynthSpec.from_json(spec_text)
    dataset, ground_truth = generate_cohort(spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_fixture(dataset, out_dir / "manifest.jsonl", out_dir / "embeddings.svem")
    write_ground_truth(ground_truth, out_dir / "ground_truth.csv")
    write_fixture_metadata(spec, out_dir / "synth_meta.json")
    stats = cohort_stats(dataset)
    print(
        f"wrote {out_dir}: speakers={stats.speaker_count} "
        f"samples={stats.total_samples} dim={dataset.matrix.dim} "
        f"duplicates={len(ground_truth)}",
        file=sys.stderr,
    )
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="manifest path (JSON lines)")
    p.add_argument("--embeddings", required=True, help="SVEM embedding matrix path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohortguard",
        description="Speaker-verification evaluation and duplicate-enrollment detection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a manifest + matrix pair")
    _add_dataset_flags(p)
    p.add_argument(
        "--strict-unreferenced",
        action="store_true",
        help="treat unreferenced matrix rows as errors instead of warnings",
    )
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="cohort statistics overall and per language")
    _add_dataset_flags(p)
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pairs", help="dump trial pairs, optionally scored")
    _add_dataset_flags(p)
    p.add_argument("--language", help="restrict to one language")
    p.add_argument("--task", help="restrict to one task")
    p.add_argument("--with-scores", action="store_true", help="append cosine scores")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("eval", help="stratified EER benchmark")
    _add_dataset_flags(p)
    p.add_argument(
        "--group-by",
        default="language",
        help="comma-separated strata keys among language,task,model_tag",
    )
    p.add_argument("--balance-speakers", type=int, help="balance each stratum to this many speakers")
    p.add_argument("--seed", type=int, help="seed for balanced subsampling")
    p.add_argument(
        "--threshold-policy",
        choices=("eer_point", "target_fpr", "target_fnr"),
        default="eer_point",
    )
    p.add_argument("--target", type=float, help="target rate for target_* policies")
    p.add_argument("--no-proximity", action="store_true", help="skip proximity annotations")
    p.add_argument("--threads", type=int, default=1, help="worker cap (outputs unchanged)")
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("det", help="DET curve over a scope")
    _add_dataset_flags(p)
    p.add_argument("--language", help="restrict to one language")
    p.add_argument("--task", help="restrict to one task")
    p.add_argument("--max-points", type=int, default=200)
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("calibrate", help="per-language operating thresholds")
    _add_dataset_flags(p)
    p.add_argument("--language", help="calibrate one language (default: all)")
    p.add_argument(
        "--policy",
        choices=("eer_point", "target_fpr", "target_fnr"),
        default="eer_point",
    )
    p.add_argument("--target", type=float, help="target rate for target_* policies")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("dedup", help="flag suspected duplicate enrollments")
    _add_dataset_flags(p)
    p.add_argument("--threshold", type=float, help="link threshold on cosine scores")
    p.add_argument(
        "--calibrate-from",
        help="scored-pair CSV (label,score columns); threshold = its EER point",
    )
    p.add_argument("--min-frac", type=float, default=DEFAULT_MIN_FRAC)
    p.add_argument("--language", help="restrict to one language scope")
    p.add_argument(
        "--cross-language",
        action="store_true",
        help="experimental: link across language boundaries",
    )
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("balance", help="subsample to a fixed speaker count")
    _add_dataset_flags(p)
    p.add_argument("--target-speakers", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output manifest path")
    p.add_argument(
        "--out-embeddings",
        help="also write a compacted matrix and renumber embedding rows",
    )
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("synth", help="generate a synthetic fixture cohort")
    p.add_argument("--spec", required=True, help="synth spec JSON path")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CohortGuardError as exc:
        return _fail(str(exc), _exit_code_for(exc))
    except OSError as exc:
        return _fail(str(exc), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
