import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tone_helpers import write_tone_wav


@pytest.fixture
def tone_fixture(tmp_path):
    """Three tone files plus a matching metadata CSV."""
    audio_dir = tmp_path / "audio"
    audio_dir.mkdir()
    tones = {"rec_a": 220.0, "rec_b": 660.0, "rec_c": 1760.0}
    for sample_id, freq in tones.items():
        write_tone_wav(audio_dir / f"{sample_id}.wav", freq)
    metadata = tmp_path / "meta.csv"
    metadata.write_text(
        "sample_id,speaker_id,language,task,session_index\n"
        "rec_a,p01,en,picture_description,0\n"
        "rec_b,p01,en,phonemic_fluency,1\n"
        "rec_c,p02,en,picture_description,0\n"
    )
    return tmp_path, audio_dir, metadata
