"""Geometric canonicalization of segmented hand images.

Coordinates are (row, col) pixel indices. Angles are in degrees, positive
counterclockwise as the image is displayed (row 0 at the top).
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .dataset import SegmentedImage
from .errors import EmptyMask

CANONICAL_SIZE = 128
TARGET_EXTENT = 120
CANONICAL_CENTER = (64.0, 64.0)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class Inclination:
    phi: float
    degenerate: bool = False

    def __post_init__(self):
        if not np.isfinite(self.phi) or not -90.0 < self.phi <= 90.0:
            raise ValueError(f"inclination must lie in (-90, 90], got {self.phi}")


@dataclass
class CanonicalHandImage:
    pixels: np.ndarray
    mask: np.ndarray
    contour: np.ndarray
    stages: dict = None

    def __post_init__(self):
        expected = (CANONICAL_SIZE, CANONICAL_SIZE)
        for name in ("pixels", "mask", "contour"):
            if getattr(self, name).shape != expected:
                raise ValueError(f"{name} must be {expected}, got {getattr(self, name).shape}")


def _as_mask(mask):
    return np.asarray(mask).astype(bool)


def largest_component(mask):
    """Keep the 8-connected component with the most pixels.

    Equal-sized components resolve to the lowest label, i.e. the first one met
    in row-major order.
    """
    mask = _as_mask(mask)
    if not mask.any():
        raise EmptyMask("mask has no foreground pixels")
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n == 1:
        return mask.copy()
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def central_moments(mask):
    """Second central moments (mu_rr, mu_cc, mu_rc) and the centroid."""
    rows, cols = np.nonzero(_as_mask(mask))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixels")
    r0, c0 = rows.mean(), cols.mean()
    dr, dc = rows - r0, cols - c0
    return (dr @ dr) / rows.size, (dc @ dc) / rows.size, (dr @ dc) / rows.size, (r0, c0)


def principal_inclination(mask, isotropy_tol=1e-9):
    """Angle of the major principal axis from vertical.

    With y pointing up, tilting the top of a vertical bar to the left is a
    positive angle.
    """
    mu_rr, mu_cc, mu_rc, _ = central_moments(mask)
    scale = mu_rr + mu_cc
    anisotropy = np.hypot(mu_rr - mu_cc, 2.0 * mu_rc)
    if scale == 0 or anisotropy <= isotropy_tol * scale:
        return Inclination(0.0, degenerate=True)
    phi = 0.5 * np.degrees(np.arctan2(2.0 * mu_rc, mu_rr - mu_cc))
    if phi <= -90.0:
        phi += 180.0
    return Inclination(float(phi))


def _rotation_geometry(shape, angle):
    h, w = shape
    theta = np.radians(angle)
    c, s = np.cos(theta), np.sin(theta)
    out_h = int(np.ceil(abs(h * c) + abs(w * s) - 1e-9))
    out_w = int(np.ceil(abs(h * s) + abs(w * c) - 1e-9))
    # keep parity so the old and new centers coincide on the pixel grid
    out_h += (out_h - h) % 2
    out_w += (out_w - w) % 2
    # output (row, col) -> input (row, col); counterclockwise on screen
    matrix = np.array([[c, s], [-s, c]])
    in_center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    out_center = np.array([(out_h - 1) / 2.0, (out_w - 1) / 2.0])
    offset = in_center - matrix @ out_center
    return matrix, offset, (out_h, out_w)


def rotate_image(image, angle, order=1):
    """Rotate counterclockwise about the image center on an enlarged canvas.

    The canvas grows just enough to hold the rotated image; the fill is 0.
    """
    image = np.asarray(image, dtype=float)
    if angle % 360 == 0:
        return image.copy()
    matrix, offset, out_shape = _rotation_geometry(image.shape, angle)
    return ndimage.affine_transform(image, matrix, offset=offset, output_shape=out_shape,
                                    order=order, mode="constant", cval=0.0)


def rotate_mask(mask, angle):
    """Rotate a binary mask; bilinear then threshold at one half."""
    return rotate_image(_as_mask(mask).astype(float), angle) >= 0.5


def run_counts(mask):
    """Number of foreground runs on every row."""
    m = _as_mask(mask).astype(np.int8)
    starts = np.diff(m, axis=1, prepend=0) == 1
    return starts.sum(axis=1)


def _mode(values):
    if len(values) == 0:
        return 0
    return int(np.argmax(np.bincount(values)))


def finger_side(mask):
    """'top', 'bottom' or None (tie), from modal run counts per bounding-box half."""
    mask = _as_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixels")
    counts = run_counts(mask[rows[0]:rows[-1] + 1])
    half = counts.size // 2
    top = _mode(counts[:half])
    bottom = _mode(counts[counts.size - half:]) if half else 0
    if top > bottom:
        return "top"
    if bottom > top:
        return "bottom"
    return None


def upright_correction(image, mask):
    """Rotate by 180 degrees when the finger side is at the bottom."""
    image = np.asarray(image, dtype=float)
    mask = _as_mask(mask)
    if finger_side(mask) == "bottom":
        return image[::-1, ::-1].copy(), mask[::-1, ::-1].copy()
    return image.copy(), mask.copy()


def resample_center(image, mask, size=CANONICAL_SIZE, extent=TARGET_EXTENT):
    """Uniformly rescale and center the mask on a ``size`` x ``size`` canvas.

    The larger bounding-box side maps to ``extent`` pixels unless the shape is
    lopsided about its centroid, in which case the scale shrinks so nothing
    leaves the ``extent`` window once the centroid sits at the center.
    """
    image = np.asarray(image, dtype=float)
    mask = _as_mask(mask)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixels")
    r0, c0 = rows.mean(), cols.mean()
    # pixel edges of the bounding box
    reach = max(r0 - (rows.min() - 0.5), rows.max() + 0.5 - r0,
                c0 - (cols.min() - 0.5), cols.max() + 0.5 - c0)
    long_side = max(np.ptp(rows), np.ptp(cols)) + 1
    scale = min(extent / long_side, (extent / 2.0) / reach)

    center = np.array(CANONICAL_CENTER) * size / CANONICAL_SIZE
    matrix = np.eye(2) / scale
    offset = np.array([r0, c0]) - center / scale
    out_shape = (size, size)
    pixels = ndimage.affine_transform(image, matrix, offset=offset, output_shape=out_shape,
                                      order=1, mode="constant", cval=0.0)
    new_mask = ndimage.affine_transform(mask.astype(float), matrix, offset=offset,
                                        output_shape=out_shape, order=0, mode="constant",
                                        cval=0.0) > 0.5
    pixels = np.clip(pixels, 0.0, None) * new_mask
    return pixels, new_mask


def extract_contour(mask):
    """Inner boundary: the mask minus its 3x3 erosion."""
    mask = _as_mask(mask)
    eroded = ndimage.binary_erosion(mask, structure=np.ones((3, 3), dtype=bool),
                                    border_value=0)
    return mask & ~eroded


def canonicalize(seg, keep_stages=False):
    """Full canonicalization of a :class:`SegmentedImage`.

    With ``keep_stages`` the intermediate images (segmented, oriented,
    upright, mask, contour) are kept on the result for debugging.
    """
    mask = largest_component(seg.mask)
    pixels = np.asarray(seg.pixels, dtype=float) * mask
    incl = principal_inclination(mask)

    oriented = rotate_image(pixels, -incl.phi)
    oriented_mask = rotate_mask(mask, -incl.phi)
    if not oriented_mask.any():
        raise EmptyMask("mask vanished during rotation")
    oriented = np.clip(oriented, 0.0, None) * oriented_mask

    upright, upright_mask = upright_correction(oriented, oriented_mask)
    out_pixels, out_mask = resample_center(upright, upright_mask)
    if not out_mask.any():
        raise EmptyMask("mask vanished during resampling")
    contour = extract_contour(out_mask)

    stages = None
    if keep_stages:
        stages = {
            "segmented": pixels,
            "oriented": oriented,
            "upright": upright,
            "mask": out_mask.astype(float),
            "contour": contour.astype(float),
        }
    return CanonicalHandImage(out_pixels, out_mask, contour, stages)
