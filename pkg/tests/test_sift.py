import numpy as np
import pytest

from handshape import synthetic
from handshape.dataset import SegmentedImage
from handshape.errors import EmptyMask, ValidationError
from handshape.preprocess import canonicalize
from handshape.sift import (
    Keypoint, SiftParams, compute_descriptors, detect_keypoints, normalize_descriptor,
    sift_descriptors,
)


def blob(center=(70.0, 50.0), sigma=4.0):
    rr, cc = np.mgrid[0:128, 0:128].astype(float)
    return np.exp(-((rr - center[0]) ** 2 + (cc - center[1]) ** 2) / (2 * sigma ** 2))


@pytest.fixture(scope="module")
def canonical_hand():
    m = synthetic.render_mask(synthetic.TEMPLATES["open"], size=200, scale=1.5, angle=20)
    return canonicalize(SegmentedImage(synthetic.shading(m, 20), m))


def test_blank_image():
    with pytest.raises(EmptyMask):
        detect_keypoints(np.zeros((128, 128)))


def test_blob_center():
    kps = detect_keypoints(blob())
    assert min(np.hypot(k.y - 70, k.x - 50) for k in kps) <= 3


def test_hand_has_several_keypoints(canonical_hand):
    kps = detect_keypoints(canonical_hand.pixels, canonical_hand.mask)
    assert len(kps) >= 4
    for k in kps:
        assert 0 <= k.x < 128 and 0 <= k.y < 128 and k.scale > 0 and 0 <= k.orientation < 360


def test_fallback_keypoint():
    img = np.zeros((128, 128))
    img[40:90, 30:100] = 1e-4                        # far below the contrast threshold
    kps = detect_keypoints(img)
    assert len(kps) == 1
    assert abs(kps[0].y - 64.5) < 1e-9 and abs(kps[0].x - 64.5) < 1e-9


def test_uniform_image_gives_zero_vectors():
    img = np.full((128, 128), 0.5)
    kp = [Keypoint(64.0, 64.0, 1.6, 0.0)]
    raw = compute_descriptors(img[20:108, 20:108].copy(), [Keypoint(44.0, 44.0, 1.6, 0.0)],
                              normalize=False)
    assert not raw.vectors.any()
    assert not normalize_descriptor(np.zeros(128)).any()
    assert compute_descriptors(img, kp).vectors.shape == (1, 128)


def test_step_edge_orientation_bins():
    img = np.zeros((128, 128))
    img[:, 64:] = 1.0                                # gradient points to +x (0 degrees)
    ds = compute_descriptors(img, [Keypoint(64.0, 64.0, 1.6, 0.0)], normalize=False)
    hist = ds.vectors.reshape(16, 8).sum(axis=0)
    assert hist.min() >= 0
    top_two = np.sort(hist)[-2:].sum()
    assert top_two >= 0.99 * hist.sum()
    assert hist.argmax() in (0, 7)


def test_norms_and_dimension(canonical_hand):
    ds = sift_descriptors(canonical_hand.pixels, canonical_hand.mask)
    assert ds.source_kind == "sift" and ds.dim == 128
    norms = np.linalg.norm(ds.vectors, axis=1)
    assert np.all((norms == 0) | (np.abs(norms - 1) <= 1e-6))
    assert np.all(ds.vectors >= 0)


def test_translation_covariance(canonical_hand):
    # wide margin so no descriptor window touches the border after the shift
    pad = 140
    img = np.pad(canonical_hand.pixels, pad)
    kps = [Keypoint(k.x + pad, k.y + pad, k.scale, k.orientation)
           for k in detect_keypoints(canonical_hand.pixels, canonical_hand.mask)]
    shifted = np.roll(img, (7, -5), axis=(0, 1))
    moved = [Keypoint(k.x - 5, k.y + 7, k.scale, k.orientation) for k in kps]
    a = compute_descriptors(img, kps).vectors
    b = compute_descriptors(shifted, moved).vectors
    assert np.abs(a - b).max() <= 1e-6


def test_deterministic(canonical_hand):
    a = sift_descriptors(canonical_hand.pixels, canonical_hand.mask).vectors
    b = sift_descriptors(canonical_hand.pixels, canonical_hand.mask).vectors
    assert np.array_equal(a, b)


def test_empty_keypoint_list():
    with pytest.raises(ValidationError):
        compute_descriptors(np.ones((10, 10)), [])


def test_params_override():
    p = SiftParams(contrast_threshold=10.0)
    assert len(detect_keypoints(blob(), params=p)) == 1
