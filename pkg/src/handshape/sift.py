"""SIFT-style keypoints and 128-d gradient histogram descriptors.

A compact re-implementation: difference-of-Gaussians extrema over a small
pyramid, a Hessian edge-response test, dominant-orientation assignment, and
4x4x8 descriptors with trilinear binning. Orientations are in degrees,
counterclockwise as displayed.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMask, ValidationError
from .radon import DescriptorSet


@dataclass(frozen=True)
class Keypoint:
    x: float            # column
    y: float            # row
    scale: float        # Gaussian sigma in base-image pixels
    orientation: float  # degrees in [0, 360)


@dataclass(frozen=True)
class SiftParams:
    n_octaves: int = 3
    scales_per_octave: int = 3
    sigma0: float = 1.6
    contrast_threshold: float = 0.02
    edge_ratio: float = 10.0
    window: int = 16            # descriptor side at sigma0, in pixels
    n_spatial: int = 4
    n_orientations: int = 8
    magnitude_clip: float = 0.2
    fallback_scale: float = 3.2


DEFAULT_PARAMS = SiftParams()


def _gaussian_pyramid(image, params):
    s = params.scales_per_octave
    k = 2.0 ** (1.0 / s)
    sigmas = [params.sigma0 * k ** i for i in range(s + 3)]
    octaves = []
    base = image
    for _ in range(params.n_octaves):
        if min(base.shape) < 8:
            break
        levels = [ndimage.gaussian_filter(base, sg, mode="constant") for sg in sigmas]
        octaves.append(np.stack(levels))
        base = levels[s][::2, ::2]
    return octaves, sigmas


def _gradients(img):
    """Magnitude and orientation (degrees, y up) by central differences."""
    dy = np.zeros_like(img)
    dx = np.zeros_like(img)
    dy[1:-1, :] = img[:-2, :] - img[2:, :]
    dx[:, 1:-1] = img[:, 2:] - img[:, :-2]
    return np.hypot(dx, dy), np.degrees(np.arctan2(dy, dx)) % 360.0


def _dominant_orientations(mag, ori, row, col, sigma, peak_ratio=0.8, n_bins=36):
    radius = int(round(3 * 1.5 * sigma))
    h, w = mag.shape
    r0, r1 = max(row - radius, 0), min(row + radius + 1, h)
    c0, c1 = max(col - radius, 0), min(col + radius + 1, w)
    rr, cc = np.mgrid[r0:r1, c0:c1]
    weight = np.exp(-((rr - row) ** 2 + (cc - col) ** 2) / (2 * (1.5 * sigma) ** 2))
    hist = np.bincount((ori[r0:r1, c0:c1] * n_bins / 360.0).astype(int).ravel() % n_bins,
                       weights=(weight * mag[r0:r1, c0:c1]).ravel(), minlength=n_bins)
    hist = np.convolve(np.r_[hist[-1], hist, hist[0]], [1 / 3, 1 / 3, 1 / 3], mode="valid")
    if hist.max() <= 0:
        return [0.0]
    peaks = []
    for i in range(n_bins):
        left, right = hist[i - 1], hist[(i + 1) % n_bins]
        if hist[i] >= peak_ratio * hist.max() and hist[i] > left and hist[i] >= right:
            offset = 0.5 * (left - right) / (left - 2 * hist[i] + right)
            peaks.append(((i + 0.5 + offset) * 360.0 / n_bins) % 360.0)
    return peaks or [float(np.argmax(hist) + 0.5) * 360.0 / n_bins]


def detect_keypoints(image, mask=None, params=DEFAULT_PARAMS):
    """DoG extrema with orientations; never empty for a non-blank image.

    When no extremum survives the thresholds, a single keypoint is placed at
    the foreground centroid with ``params.fallback_scale``.
    """
    image = np.asarray(image, dtype=float)
    fg = (image > 0) if mask is None else np.asarray(mask, dtype=bool)
    if not fg.any():
        raise EmptyMask("image has no foreground")
    octaves, sigmas = _gaussian_pyramid(image, params)
    s = params.scales_per_octave
    r = params.edge_ratio
    keypoints = []
    for o, gauss in enumerate(octaves):
        dog = np.diff(gauss, axis=0)
        local_max = ndimage.maximum_filter(dog, size=3, mode="nearest") == dog
        local_min = ndimage.minimum_filter(dog, size=3, mode="nearest") == dog
        strong = np.abs(dog) >= params.contrast_threshold
        cand = (local_max | local_min) & strong
        cand[0] = cand[-1] = False
        cand[:, :1] = cand[:, -1:] = False
        cand[:, :, :1] = cand[:, :, -1:] = False
        for lvl, row, col in zip(*np.nonzero(cand)):
            d = dog[lvl]
            dxx = d[row, col + 1] + d[row, col - 1] - 2 * d[row, col]
            dyy = d[row + 1, col] + d[row - 1, col] - 2 * d[row, col]
            dxy = 0.25 * (d[row + 1, col + 1] - d[row + 1, col - 1]
                          - d[row - 1, col + 1] + d[row - 1, col - 1])
            tr, det = dxx + dyy, dxx * dyy - dxy * dxy
            if det <= 0 or tr * tr * r >= (r + 1) ** 2 * det:
                continue
            sigma = sigmas[lvl]
            mag, ori = _gradients(gauss[lvl])
            for angle in _dominant_orientations(mag, ori, row, col, sigma):
                keypoints.append(Keypoint(float(col * 2 ** o), float(row * 2 ** o),
                                          float(sigma * 2 ** o), float(angle)))
    if not keypoints:
        rows, cols = np.nonzero(fg)
        blurred = ndimage.gaussian_filter(image, params.fallback_scale, mode="constant")
        mag, ori = _gradients(blurred)
        row, col = int(round(rows.mean())), int(round(cols.mean()))
        angle = _dominant_orientations(mag, ori, row, col, params.fallback_scale)[0]
        keypoints.append(Keypoint(float(cols.mean()), float(rows.mean()),
                                  params.fallback_scale, float(angle)))
    keypoints.sort(key=lambda kp: (kp.scale, kp.y, kp.x, kp.orientation))
    return keypoints


def _descriptor(mag, ori, kp, params):
    n_sp, n_or = params.n_spatial, params.n_orientations
    bin_width = params.window / n_sp * kp.scale / params.sigma0
    half = 0.5 * n_sp * bin_width
    radius = int(np.ceil(half * np.sqrt(2) + bin_width))
    h, w = mag.shape
    cx, cy = int(round(kp.x)), int(round(kp.y))
    r0, r1 = max(cy - radius, 0), min(cy + radius + 1, h)
    c0, c1 = max(cx - radius, 0), min(cx + radius + 1, w)
    hist = np.zeros((n_sp + 2, n_sp + 2, n_or))
    if r0 >= r1 or c0 >= c1:
        return hist[1:-1, 1:-1].ravel()
    rr, cc = np.mgrid[r0:r1, c0:c1]
    # offsets in the keypoint frame: u along the orientation, v perpendicular (y up)
    dx, dy = cc - kp.x, kp.y - rr
    a = np.radians(kp.orientation)
    u = np.cos(a) * dx + np.sin(a) * dy
    v = -np.sin(a) * dx + np.cos(a) * dy
    sigma_w = half
    weight = np.exp(-(u ** 2 + v ** 2) / (2 * sigma_w ** 2)) * mag[r0:r1, c0:c1]
    # continuous bin coordinates, cell centers at integers 0..n_sp-1
    bu = u / bin_width + n_sp / 2.0 - 0.5
    bv = v / bin_width + n_sp / 2.0 - 0.5
    bo = ((ori[r0:r1, c0:c1] - kp.orientation) % 360.0) * n_or / 360.0
    keep = (bu > -1) & (bu < n_sp) & (bv > -1) & (bv < n_sp) & (weight > 0)
    bu, bv, bo, weight = bu[keep], bv[keep], bo[keep], weight[keep]
    iu, iv, io = np.floor(bu), np.floor(bv), np.floor(bo)
    fu, fv, fo = bu - iu, bv - iv, bo - io
    iu, iv, io = iu.astype(int) + 1, iv.astype(int) + 1, io.astype(int)
    for du, wu in ((0, 1 - fu), (1, fu)):
        for dv, wv in ((0, 1 - fv), (1, fv)):
            for do, wo in ((0, 1 - fo), (1, fo)):
                np.add.at(hist, (iu + du, iv + dv, (io + do) % n_or), weight * wu * wv * wo)
    # spatial layout: rows of the grid follow v from top (positive) to bottom
    return hist[1:-1, 1:-1][:, ::-1].transpose(1, 0, 2).ravel()


def normalize_descriptor(vec, clip=0.2):
    norm = np.linalg.norm(vec)
    if norm == 0:
        return vec
    vec = np.minimum(vec / norm, clip)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def compute_descriptors(image, keypoints, params=DEFAULT_PARAMS, normalize=True):
    """One 128-d descriptor per keypoint, as a ``sift`` DescriptorSet.

    Gradients come from the image blurred at each keypoint's scale.
    """
    image = np.asarray(image, dtype=float)
    if not keypoints:
        raise ValidationError("at least one keypoint is required")
    cache = {}
    out = []
    for kp in keypoints:
        if kp.scale not in cache:
            cache[kp.scale] = _gradients(ndimage.gaussian_filter(image, kp.scale, mode="constant"))
        vec = _descriptor(*cache[kp.scale], kp, params)
        out.append(normalize_descriptor(vec, params.magnitude_clip) if normalize else vec)
    return DescriptorSet(np.array(out), "sift")


def sift_descriptors(image, mask=None, params=DEFAULT_PARAMS):
    return compute_descriptors(image, detect_keypoints(image, mask, params), params)
