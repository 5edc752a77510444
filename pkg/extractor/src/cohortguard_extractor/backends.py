"""Embedding backends.

A backend maps decoded mono audio to one fixed-dimension vector per
file. The NeMo backend wraps the pretrained speaker models from the
public model zoo; the spectral backend is a deterministic lightweight
featurizer used for plumbing tests and dry runs where model weights are
unavailable. It is NOT a speaker model: it separates synthetic tones,
not people.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .errors import AudioError, BackendError

MODEL_TAGS = ("speakernet", "titanet", "ecapa_tdnn")

_NEMO_MODEL_NAMES = {
    "speakernet": "speakerverification_speakernet",
    "titanet": "titanet_large",
    "ecapa_tdnn": "ecapa_tdnn",
}


class EmbeddingBackend(Protocol):
    name: str
    version: str

    def embed(self, samples: np.ndarray, sample_rate: int) -> np.ndarray:
        """One 1-D embedding for one decoded mono file."""
        ...


class SpectralStubBackend:
    """Deterministic band-energy statistics pooled over frames.

    Frames of 512 samples (hop 256) are Hann-windowed; power in
    ``n_bands`` log-spaced bands is log-compressed and mean/std-pooled
    into a vector of 2 * n_bands. Digital silence has no spectrum to
    summarize and is rejected as undecodable.
    """

    name = "stub-spectral"
    version = "1"

    def __init__(self, n_bands: int = 24):
        self.n_bands = n_bands
        self._window = np.hanning(512)

    def embed(self, samples: np.ndarray, sample_rate: int) -> np.ndarray:
        frame, hop = 512, 256
        x = np.asarray(samples, dtype=np.float64)
        if x.size < frame:
            x = np.pad(x, (0, frame - x.size))
        n_frames = 1 + (x.size - frame) // hop
        edges = np.unique(
            np.geomspace(1, frame // 2, num=self.n_bands + 1).astype(int)
        )
        bands = np.zeros((n_frames, len(edges) - 1))
        for i in range(n_frames):
            seg = x[i * hop : i * hop + frame] * self._window
            power = np.abs(np.fft.rfft(seg)) ** 2
            for b in range(len(edges) - 1):
                bands[i, b] = power[edges[b] : edges[b + 1]].sum()
        feats = np.log1p(bands)
        vec = np.concatenate([feats.mean(axis=0), feats.std(axis=0)])
        if not np.isfinite(vec).all() or not vec.any():
            raise AudioError("no usable signal (silent or degenerate audio)")
        return vec.astype(np.float32)


class NemoBackend:
    """Pretrained speaker models served through the NVIDIA NeMo toolkit.

    Weights are fetched from the public model zoo on first use. Batch
    inference is not bitwise deterministic across runs; the manifest is,
    and downstream cosine scoring tolerates embedding jitter.
    """

    def __init__(self, model_tag: str):
        if model_tag not in _NEMO_MODEL_NAMES:
            raise BackendError(f"unknown model tag {model_tag!r}, expected {MODEL_TAGS}")
        try:
            import nemo.collections.asr as nemo_asr
        except ImportError as exc:
            raise BackendError(
                "the nemo backend needs nemo_toolkit[asr]; install it or use "
                "--backend spectral for a model-free dry run"
            ) from exc
        self.name = "nemo"
        self._model = nemo_asr.models.EncDecSpeakerLabelModel.from_pretrained(
            model_name=_NEMO_MODEL_NAMES[model_tag]
        )
        self._model.eval()
        self.version = getattr(
            __import__("nemo"), "__version__", "unknown"
        )

    def embed(self, samples: np.ndarray, sample_rate: int) -> np.ndarray:
        import tempfile
        import wave as wave_mod

        with tempfile.NamedTemporaryFile(suffix=".wav") as tmp:
            pcm = np.clip(samples, -1.0, 1.0)
            with wave_mod.open(tmp.name, "wb") as out:
                out.setnchannels(1)
                out.setsampwidth(2)
                out.setframerate(sample_rate)
                out.writeframes((pcm * 32767.0).astype("<i2").tobytes())
            emb = self._model.get_embedding(tmp.name)
        return np.asarray(emb.squeeze().cpu().numpy(), dtype=np.float32)


def resolve_backend(model_tag: str, backend: str = "nemo") -> EmbeddingBackend:
    if model_tag not in MODEL_TAGS:
        raise BackendError(f"unknown model tag {model_tag!r}, expected {MODEL_TAGS}")
    if backend == "nemo":
        return NemoBackend(model_tag)
    if backend == "spectral":
        return SpectralStubBackend()
    raise BackendError(f"unknown backend {backend!r}, expected nemo or spectral")
