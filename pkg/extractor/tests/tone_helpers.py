import wave
from pathlib import Path

import numpy as np


def write_tone_wav(
    path: Path,
    freq_hz: float,
    duration_sec: float = 0.6,
    rate: int = 16000,
    amplitude: float = 0.4,
) -> None:
    t = np.arange(int(duration_sec * rate)) / rate
    pcm = (amplitude * np.sin(2 * np.pi * freq_hz * t) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as out:
        out.setnchannels(1)
        out.setsampwidth(2)
        out.setframerate(rate)
        out.writeframes(pcm.tobytes())
