class ExtractorError(Exception):
    """Base class for adapter failures."""


class AudioError(ExtractorError):
    """A file could not be decoded into usable audio."""


class MetadataError(ExtractorError):
    """The metadata CSV is malformed or inconsistent with the audio dir."""


class BackendError(ExtractorError):
    """An embedding backend is unavailable or misbehaved."""
