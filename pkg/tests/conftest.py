import numpy as np
import pytest
from PIL import Image

from mrcteval.imageio import ImagePlane


def random_plane(seed, shape=(16, 16), low=0.0, high=255.0):
    rng = np.random.default_rng(seed)
    return ImagePlane.from_array(rng.uniform(low, high, shape))


def write_png(path, array, mode="L"):
    arr = np.asarray(array)
    img = Image.fromarray(arr.astype(np.uint8), mode=mode)
    img.save(path, format="PNG")
    return path


@pytest.fixture
def png_factory(tmp_path):
    counter = {"n": 0}

    def make(array, mode="L", name=None):
        counter["n"] += 1
        target = tmp_path / (name or f"img_{counter['n']:03d}.png")
        return write_png(target, array, mode=mode)

    return make
