"""Adapter: pretrained speaker-embedding models -> cohortguard inputs.

Consumes WAV/FLAC audio plus a metadata CSV and emits the evaluation
toolkit's manifest and SVEM matrix files. Strictly one-way: no scores,
no metrics, so the evaluation side stays testable without any model
runtime.
"""

__version__ = "0.1.0"

from .audio import DecodedAudio, load_audio
from .backends import MODEL_TAGS, NemoBackend, SpectralStubBackend, resolve_backend
from .errors import AudioError, BackendError, ExtractorError, MetadataError
from .extract import ExtractionJob, ExtractionResult, extract
from .metadata import MetadataRow, read_metadata_csv

__all__ = [
    "__version__",
    "AudioError",
    "BackendError",
    "DecodedAudio",
    "ExtractionJob",
    "ExtractionResult",
    "ExtractorError",
    "MODEL_TAGS",
    "MetadataError",
    "MetadataRow",
    "NemoBackend",
    "SpectralStubBackend",
    "extract",
    "load_audio",
    "read_metadata_csv",
    "resolve_backend",
]
