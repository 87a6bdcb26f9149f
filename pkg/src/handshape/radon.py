"""Discrete Radon transform and the 32x32 Radon descriptor.

Lines are parameterized about pixel (64, 64) of the 128x128 canvas, with
x = col - 64 and y = 64 - row. A pixel at (x, y) lies on the line with
offset ``b = x cos(theta) + y sin(theta)``; its intensity is split between
the two nearest integer offset bins in proportion to distance.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError

IMAGE_SIZE = 128
ANGLES = np.arange(1, 181, dtype=float)
MAX_OFFSET = 91
N_OFFSETS = 2 * MAX_OFFSET + 1
DESCRIPTOR_SHAPE = (32, 32)


@dataclass
class Sinogram:
    """``values[i, j]`` is the line integral at ``angles[i]`` and offset ``offsets[j]``."""

    values: np.ndarray
    angles: np.ndarray
    offsets: np.ndarray

    @property
    def n_offsets(self):
        return self.values.shape[1]


@dataclass
class DescriptorSet:
    """Variable-size set of equal-length feature vectors for one sample."""

    vectors: np.ndarray
    source_kind: str = None    # "radon-local", "radon-global", "sift" or unspecified

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1:
            raise ValidationError("a descriptor set needs at least one vector")
        if self.source_kind == "radon-local" and self.vectors.shape != DESCRIPTOR_SHAPE:
            raise ValidationError(
                f"radon-local sets hold 32 vectors of length 32, got {self.vectors.shape}")

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]


def _pixel_offsets(shape, center):
    rows, cols = np.indices(shape, dtype=float)
    return cols.ravel() - center[1], center[0] - rows.ravel()


def project(image, angles, center=(64.0, 64.0), max_offset=MAX_OFFSET):
    """Pixel-splatting projections of ``image`` at arbitrary angles (degrees)."""
    image = np.asarray(image, dtype=float)
    x, y = _pixel_offsets(image.shape, center)
    f = image.ravel()
    n_bins = 2 * max_offset + 1
    out = np.zeros((len(angles), n_bins))
    for i, theta in enumerate(np.radians(np.asarray(angles, dtype=float))):
        b = x * np.cos(theta) + y * np.sin(theta) + max_offset
        lo = np.floor(b)
        frac = b - lo
        lo = lo.astype(np.intp)
        if lo.min() < 0 or lo.max() + 1 >= n_bins:
            raise DimensionError("image extends beyond the offset range")
        out[i] = np.bincount(lo, weights=f * (1.0 - frac), minlength=n_bins)
        out[i] += np.bincount(lo + 1, weights=f * frac, minlength=n_bins)
    return out


def radon_transform(image):
    """Sinogram over angles 1..180 and offsets -91..91 of a 128x128 image."""
    image = np.asarray(image, dtype=float)
    if image.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise DimensionError(f"expected a {IMAGE_SIZE}x{IMAGE_SIZE} image, got {image.shape}")
    values = project(image, ANGLES)
    return Sinogram(values, ANGLES.copy(), np.arange(-MAX_OFFSET, MAX_OFFSET + 1, dtype=float))


def _area_weights(n_in, n_out):
    """(n_out, n_in) matrix averaging input cells over equal output bands."""
    edges = np.linspace(0.0, n_in, n_out + 1)
    lo = np.arange(n_in)
    overlap = np.clip(np.minimum(edges[1:, None], lo[None, :] + 1)
                      - np.maximum(edges[:-1, None], lo[None, :]), 0.0, None)
    return overlap / (n_in / n_out)


def resample_sinogram(sinogram, shape=DESCRIPTOR_SHAPE):
    """Area-weighted block average of the sinogram down to ``shape``."""
    values = sinogram.values if isinstance(sinogram, Sinogram) else np.asarray(sinogram, float)
    rows = _area_weights(values.shape[0], shape[0])
    cols = _area_weights(values.shape[1], shape[1])
    return rows @ values @ cols.T


def radon_descriptor(image):
    return resample_sinogram(radon_transform(image))


def to_global(r):
    r = np.asarray(r, dtype=float)
    if r.shape != DESCRIPTOR_SHAPE:
        raise DimensionError(f"expected a 32x32 descriptor, got {r.shape}")
    return r.reshape(-1).copy()


def from_global(v):
    v = np.asarray(v, dtype=float)
    if v.shape != (DESCRIPTOR_SHAPE[0] * DESCRIPTOR_SHAPE[1],):
        raise DimensionError(f"expected a 1024-vector, got {v.shape}")
    return v.reshape(DESCRIPTOR_SHAPE).copy()


def to_local_rows(r):
    r = np.asarray(r, dtype=float)
    if r.shape != DESCRIPTOR_SHAPE:
        raise DimensionError(f"expected a 32x32 descriptor, got {r.shape}")
    return DescriptorSet(r.copy(), "radon-local")
