"""Input checks shared by the estimators."""

import numpy as np

from .errors import DimensionError, EmptySample, ValidationError
from .radon import DescriptorSet


def check_descriptor_sets(X, dim=None, kind=None):
    """Coerce ``X`` to a list of DescriptorSets of uniform dimension.

    Accepts DescriptorSets or 2-d arrays (one row per vector). Returns the
    list and the common dimension.
    """
    if isinstance(X, DescriptorSet):
        raise ValidationError("expected a sequence of descriptor sets, got a single set")
    if len(X) == 0:
        raise ValidationError("no samples given")
    out = []
    for i, x in enumerate(X):
        if not isinstance(x, DescriptorSet):
            arr = np.asarray(x, dtype=float)
            if arr.ndim == 1:
                arr = arr[None, :]
            if arr.ndim != 2:
                raise DimensionError(f"sample {i}: expected a 2-d array, got shape {arr.shape}")
            if arr.shape[0] == 0:
                raise EmptySample(f"sample {i} has no vectors")
            x = DescriptorSet(arr, kind)
        elif kind is not None and x.source_kind != kind:
            raise ValidationError(
                f"sample {i}: descriptor kind {x.source_kind!r} does not match {kind!r}")
        if not np.all(np.isfinite(x.vectors)):
            raise ValidationError(f"sample {i} contains non-finite values")
        if dim is None:
            dim = x.dim
        elif x.dim != dim:
            raise DimensionError(f"sample {i}: vector dimension {x.dim} does not match {dim}")
        out.append(x)
    return out, dim


def check_labels(y, n_samples, n_classes=None):
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_samples:
        raise ValidationError(f"expected {n_samples} labels, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValidationError("labels must be integer class ids")
        y = y.astype(int)
    if np.any(y < 0) or (n_classes is not None and np.any(y >= n_classes)):
        raise ValidationError(f"labels must lie in [0, {n_classes})")
    return y


def check_image(image, shape=None, name="image"):
    arr = np.asarray(image, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-d grid, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    return arr
