"""Audio decoding: WAV via the stdlib, FLAC via soundfile when installed.

Everything downstream works on mono float64 samples in [-1, 1]; stereo
input is averaged across channels.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AudioError

AUDIO_EXTENSIONS = (".wav", ".flac")


@dataclass(frozen=True)
class DecodedAudio:
    samples: np.ndarray  # mono float64
    sample_rate: int

    @property
    def duration_sec(self) -> float:
        return self.samples.size / self.sample_rate


def _decode_wav(path: Path) -> DecodedAudio:
    try:
        with wave.open(str(path), "rb") as wav:
            n_channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            frames = wav.readframes(wav.getnframes())
    except (wave.Error, EOFError, OSError) as exc:
        raise AudioError(f"{path}: cannot decode WAV: {exc}") from exc
    if rate <= 0:
        raise AudioError(f"{path}: bad sample rate {rate}")
    if width == 1:  # unsigned 8-bit
        data = np.frombuffer(frames, dtype=np.uint8).astype(np.float64)
        data = (data - 128.0) / 128.0
    elif width == 2:
        data = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 4:
        data = np.frombuffer(frames, dtype="<i4").astype(np.float64) / 2147483648.0
    else:
        raise AudioError(f"{path}: unsupported WAV sample width {width * 8} bits")
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    if data.size == 0:
        raise AudioError(f"{path}: empty audio stream")
    return DecodedAudio(samples=data, sample_rate=rate)


def _decode_flac(path: Path) -> DecodedAudio:
    try:
        import soundfile
    except ImportError as exc:
        raise AudioError(
            f"{path}: FLAC decoding needs the optional soundfile package"
        ) from exc
    try:
        data, rate = soundfile.read(str(path), dtype="float64", always_2d=True)
    except Exception as exc:  # soundfile raises its own RuntimeError family
        raise AudioError(f"{path}: cannot decode FLAC: {exc}") from exc
    mono = data.mean(axis=1)
    if mono.size == 0:
        raise AudioError(f"{path}: empty audio stream")
    return DecodedAudio(samples=mono, sample_rate=int(rate))


def load_audio(path: str | Path) -> DecodedAudio:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".wav":
        return _decode_wav(path)
    if suffix == ".flac":
        return _decode_flac(path)
    raise AudioError(
        f"{path}: unsupported audio format {suffix!r}, expected one of {AUDIO_EXTENSIONS}"
    )


def find_audio_file(audio_dir: Path, sample_id: str) -> Path | None:
    """Resolve <audio_dir>/<sample_id>.{wav,flac}."""
    for ext in AUDIO_EXTENSIONS:
        candidate = audio_dir / f"{sample_id}{ext}"
        if candidate.is_file():
            return candidate
    return None
