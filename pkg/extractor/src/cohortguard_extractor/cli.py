"""Extraction CLI.

    cohortguard-extract --audio-dir DIR --metadata rows.csv --model titanet \
        --out-manifest m.jsonl --out-matrix e.svem [--backend nemo|spectral] \
        [--skip-bad-audio]

Exit codes: 0 success, 1 metadata/validation problem, 2 backend
unavailable, 3 audio/I-O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backends import MODEL_TAGS, resolve_backend
from .errors import AudioError, BackendError, ExtractorError, MetadataError
from .extract import ExtractionJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohortguard-extract",
        description="Embed audio files and emit a cohortguard manifest + SVEM matrix.",
    )
    parser.add_argument("--audio-dir", required=True)
    parser.add_argument("--metadata", required=True, help="CSV: sample_id,speaker_id,language,task,session_index")
    parser.add_argument("--model", required=True, choices=MODEL_TAGS)
    parser.add_argument("--out-manifest", required=True)
    parser.add_argument("--out-matrix", required=True)
    parser.add_argument(
        "--backend",
        choices=("nemo", "spectral"),
        default="nemo",
        help="spectral is a deterministic model-free featurizer for dry runs",
    )
    parser.add_argument(
        "--skip-bad-audio",
        action="store_true",
        help="skip undecodable files (reported to stderr) instead of failing",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        backend = resolve_backend(args.model, args.backend)
        job = ExtractionJob(
            audio_dir=Path(args.audio_dir),
            metadata_csv=Path(args.metadata),
            model_tag=args.model,
            out_manifest=Path(args.out_manifest),
            out_matrix=Path(args.out_matrix),
        )
        result = extract(job, backend=backend, skip_bad_audio=args.skip_bad_audio)
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MetadataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AudioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for line in result.skipped:
        print(f"skipped: {line}", file=sys.stderr)
    print(
        f"emitted {result.emitted} rows (dim={result.dim}) "
        f"tagged {result.model_tag_stamp}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
