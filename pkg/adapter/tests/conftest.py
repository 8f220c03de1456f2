import numpy as np
import pytest

from adapter_testutil import write_rgb


@pytest.fixture
def rng():
    return np.random.default_rng(321)


@pytest.fixture
def image_pair(tmp_path, rng):
    """Two 32x32 images sharing a bright square at shifted positions."""
    d = tmp_path / "imgs"
    d.mkdir()
    for i, off in enumerate((0, 3)):
        img = np.full((32, 32, 3), [0.2, 0.45, 0.3]) + rng.uniform(-0.05, 0.05, (32, 32, 3))
        img[8 + off:20 + off, 8:20] = [0.85, 0.2, 0.15]
        write_rgb(d / f"im{i}.png", np.clip(img, 0, 1))
    return d
