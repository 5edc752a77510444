"""Speaker-verification evaluation and duplicate-enrollment detection.

The pipeline: ingest per-sample embeddings plus trial metadata, build
same/different-speaker trial pairs within each (dataset, language)
stratum, score them with cosine similarity, sweep thresholds for
EER/DET and calibrated operating points, and cluster speakers whose
cross-sample scores say they are the same person enrolled twice.
"""

__version__ = "0.1.0"

from .core import (
    CohortDataset,
    CohortStats,
    EmbeddingMatrix,
    SampleRecord,
    TASKS,
    bind_dataset,
    cohort_stats,
    load_embeddings,
    load_manifest,
    write_embeddings,
    write_manifest,
)
from .dedup import (
    DuplicateReport,
    SpeakerLinkScore,
    VerificationMatch,
    find_duplicate_clusters,
    link_speakers,
    verify_enrollment,
)
from .errors import (
    CalibrationError,
    CohortGuardError,
    EmptyScopeError,
    FormatError,
    UndefinedMetricError,
    UnknownLanguageError,
    ValidationError,
)
from .harness import (
    BalanceSpec,
    BenchmarkConfig,
    BenchmarkReport,
    BenchmarkRow,
    balanced_subsample,
    language_proximity,
    run_benchmark,
    stratify,
)
from .metrics import (
    DETCurve,
    EERResult,
    SweepPoint,
    calibrate_threshold,
    det_curve,
    eer,
    rates_at_threshold,
    sweep,
)
from .pairing import (
    PairLabel,
    PairPlan,
    PairScope,
    TrialPair,
    generate_pairs,
    plan_pairs,
)
from .scoring import ScoredPairSet, ScoreTable, cosine, score_matrix, score_pairs
from .synth import SynthSpec, generate_cohort, write_fixture, write_ground_truth

__all__ = [
    "__version__",
    "BalanceSpec",
    "BenchmarkConfig",
    "BenchmarkReport",
    "BenchmarkRow",
    "CalibrationError",
    "CohortDataset",
    "CohortGuardError",
    "CohortStats",
    "DETCurve",
    "DuplicateReport",
    "EERResult",
    "EmbeddingMatrix",
    "EmptyScopeError",
    "FormatError",
    "PairLabel",
    "PairPlan",
    "PairScope",
    "SampleRecord",
    "ScoreTable",
    "ScoredPairSet",
    "SpeakerLinkScore",
    "SweepPoint",
    "SynthSpec",
    "TASKS",
    "TrialPair",
    "UndefinedMetricError",
    "UnknownLanguageError",
    "ValidationError",
    "VerificationMatch",
    "balanced_subsample",
    "bind_dataset",
    "calibrate_threshold",
    "cohort_stats",
    "cosine",
    "det_curve",
    "eer",
    "find_duplicate_clusters",
    "generate_cohort",
    "generate_pairs",
    "language_proximity",
    "link_speakers",
    "load_embeddings",
    "load_manifest",
    "plan_pairs",
    "rates_at_threshold",
    "run_benchmark",
    "score_matrix",
    "score_pairs",
    "stratify",
    "sweep",
    "verify_enrollment",
    "write_embeddings",
    "write_fixture",
    "write_ground_truth",
    "write_manifest",
]
