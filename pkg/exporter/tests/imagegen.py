"""Tiny seeded PNG generator shared by the exporter tests."""

import numpy as np
from PIL import Image


def rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


def write_frame(path, seed, size=(24, 24)):
    pixels = rng(seed).integers(0, 256, size=(size[1], size[0], 3),
                                dtype=np.uint8)
    Image.fromarray(pixels, "RGB").save(path)
