import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from imagegen import write_frame  # noqa: E402


@pytest.fixture
def frames_dir(tmp_path):
    """Three video folders (one per class) with 3-5 frames each."""
    root = tmp_path / "frames"
    layout = {
        "running__clip01": 4,
        "jumping__clip02": 3,
        "waving__clip03": 5,
    }
    seed = 0
    for video_id, count in layout.items():
        folder = root / video_id
        folder.mkdir(parents=True)
        for i in range(count):
            write_frame(folder / f"frame_{i:03d}.png", seed)
            seed += 1
    return root
