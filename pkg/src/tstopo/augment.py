"""View generation (overlapping random crops) and distortion transforms
for the augmentation-robustness study."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SeriesTooShortError(ValueError):
    pass


@dataclass(frozen=True)
class CropPair:
    """Two contiguous index ranges [a1, b1) and [a2, b2) into [0, T) with
    a1 <= a2 < b1 <= b2, so the overlap [a2, b1) is never empty."""
    a1: int
    b1: int
    a2: int
    b2: int

    @property
    def overlap(self) -> tuple:
        return (self.a2, self.b1)

    def slice_views(self, values: np.ndarray) -> tuple:
        return values[self.a1:self.b1], values[self.a2:self.b2]

    def overlap_in_views(self) -> tuple:
        """Index ranges of the overlap inside each view's local coordinates."""
        return ((self.a2 - self.a1, self.b1 - self.a1),
                (0, self.b1 - self.a2))


def random_crop_pair(t: int, rng: np.random.Generator) -> CropPair:
    """Sample two overlapping crops of a length-T series."""
    if t < 2:
        raise SeriesTooShortError("need T >= 2 to crop two overlapping views")
    a2 = int(rng.integers(0, t - 1))
    b1 = int(rng.integers(a2 + 1, t + 1))
    a1 = int(rng.integers(0, a2 + 1))
    b2 = int(rng.integers(b1, t + 1))
    return CropPair(a1=a1, b1=b1, a2=a2, b2=b2)


def jitter(values: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if sigma == 0:
        return values.copy()
    return values + rng.normal(0.0, sigma, size=values.shape)


def scale(values: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    factors = rng.normal(1.0, sigma, size=(1, values.shape[1]))
    return values * factors


def shift(values: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    offsets = rng.normal(0.0, sigma, size=(1, values.shape[1]))
    return values + offsets


def segment_permute(values: np.ndarray, n_segments: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Split into n contiguous segments and shuffle their order."""
    values = np.asarray(values, dtype=np.float64)
    t = values.shape[0]
    if not 1 <= n_segments <= t:
        raise ValueError("need 1 <= n_segments <= T")
    if n_segments == 1:
        return values.copy()
    bounds = np.linspace(0, t, n_segments + 1).round().astype(int)
    segments = [values[bounds[i]:bounds[i + 1]] for i in range(n_segments)]
    order = rng.permutation(n_segments)
    return np.concatenate([segments[i] for i in order], axis=0)


def flip(values: np.ndarray) -> np.ndarray:
    return -np.asarray(values, dtype=np.float64)


TRANSFORM_NAMES = ("none", "jitter", "scale", "shift", "permute", "flip")


def apply_transform(name: str, values: np.ndarray, rng: np.random.Generator,
                    sigma: float = 0.1, n_segments: int = 5) -> np.ndarray:
    if name == "none":
        return np.asarray(values, dtype=np.float64)
    if name == "jitter":
        return jitter(values, sigma, rng)
    if name == "scale":
        return scale(values, sigma, rng)
    if name == "shift":
        return shift(values, sigma, rng)
    if name == "permute":
        return segment_permute(values, n_segments, rng)
    if name == "flip":
        return flip(values)
    raise ValueError(f"unknown transform {name!r}")
