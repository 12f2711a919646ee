"""Five-level feature pyramids and their on-disk container."""

from dataclasses import dataclass

import numpy as np

from ..rng import keyed_rng
from . import store

PYRAMID_MAGIC = "FEATLINK-PYRAMID"
LEVELS = ("p2", "p3", "p4", "p5", "p6")
STRIDES = {"p2": 4, "p3": 8, "p4": 16, "p5": 32, "p6": 64}
WIDTH = 256


def check_image_size(h, w):
    if h < 64 or w < 64 or h % 64 or w % 64:
        raise ValueError(f"image size {h}x{w} must be a positive multiple of 64")


@dataclass
class FeaturePyramid:
    """P2..P6, each (256, H/stride, W/stride) float32."""

    p2: np.ndarray
    p3: np.ndarray
    p4: np.ndarray
    p5: np.ndarray
    p6: np.ndarray

    def __post_init__(self):
        h4, w4 = np.shape(self.p2)[1:]
        check_image_size(4 * h4, 4 * w4)
        for name in LEVELS:
            arr = np.asarray(getattr(self, name), dtype=np.float32)
            want = level_shape(name, 4 * h4, 4 * w4)
            if arr.shape != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected {want}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite values")
            setattr(self, name, arr)

    @property
    def image_size(self):
        return 4 * self.p2.shape[1], 4 * self.p2.shape[2]

    def levels(self):
        return {name: getattr(self, name) for name in LEVELS}

    def volume(self, levels=LEVELS):
        return sum(getattr(self, name).size for name in levels)

    def save(self, stem, meta=None):
        return store.save_container(stem, self.levels(), PYRAMID_MAGIC, meta)

    @classmethod
    def load(cls, stem):
        tensors, _ = store.load_container(stem, PYRAMID_MAGIC)
        missing = [n for n in LEVELS if n not in tensors]
        if missing:
            raise store.ContainerError(f"pyramid container missing levels {missing}")
        return cls(**{n: tensors[n] for n in LEVELS})


def level_shape(name, h, w):
    s = STRIDES[name]
    return (WIDTH, h // s, w // s)


def synth_pyramid(h, w, seed, distribution="normal", loc=0.0, scale=1.0):
    """Seeded stand-in for backbone+FPN output.

    ``distribution`` is ``"normal"`` (mean ``loc``, std ``scale``) or
    ``"uniform"`` (on ``[loc - scale, loc + scale]``).
    """
    check_image_size(h, w)
    rng = keyed_rng(seed, 0, "pyramid")
    levels = {}
    for name in LEVELS:
        shape = level_shape(name, h, w)
        if distribution == "normal":
            arr = rng.normal(loc, scale, shape)
        elif distribution == "uniform":
            arr = rng.uniform(loc - scale, loc + scale, shape)
        else:
            raise ValueError(f"unknown distribution {distribution!r}")
        levels[name] = arr.astype(np.float32)
    return FeaturePyramid(**levels)


def volume_ratio(h, w):
    """V_in / V_out for the fusion stage: P2..P5 against the fused 256 x H/16 x W/16 map."""
    check_image_size(h, w)
    v_in = sum(np.prod(level_shape(n, h, w)) for n in ("p2", "p3", "p4", "p5"))
    v_out = np.prod(level_shape("p4", h, w))
    return float(v_in) / float(v_out)
