"""scikit-learn compatible wrappers around the pipeline stages.

Typical use::

    pipe = make_pipeline(Canonicalizer(), DescriptorExtractor(), ProbSomClassifier())
    pipe.fit(rgb_images, labels)
    pipe.predict(more_images)

Samples flow between stages as Python lists (images, canonical hands,
descriptor sets) rather than 2-d arrays, since descriptor sets vary in size.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import probsom
from .dataset import GloveFilterConfig, SegmentedImage, segment_image
from .errors import ValidationError
from .preprocess import CANONICAL_SIZE, CanonicalHandImage, canonicalize
from .radon import DescriptorSet, radon_descriptor, to_global, to_local_rows
from .sift import SiftParams, sift_descriptors
from .validation import check_descriptor_sets, check_image, check_labels

DESCRIPTOR_CHOICES = ("radon-local", "radon-global", "sift")


class Canonicalizer(TransformerMixin, BaseEstimator):
    """Segment (if needed) and canonicalize hand images.

    Accepts RGB arrays or :class:`SegmentedImage` objects and returns
    :class:`CanonicalHandImage` objects.
    """

    def __init__(self, segmentation="auto", glove_config=None):
        self.segmentation = segmentation
        self.glove_config = glove_config

    def fit(self, X, y=None):
        return self

    def __sklearn_is_fitted__(self):
        return True

    def _segment(self, x):
        if isinstance(x, SegmentedImage):
            return x
        config = self.glove_config
        if isinstance(config, dict):
            config = GloveFilterConfig.from_dict(config)
        return segment_image(x, config, self.segmentation)

    def transform(self, X):
        return [x if isinstance(x, CanonicalHandImage) else canonicalize(self._segment(x))
                for x in X]


def extract_descriptors(canonical, kind="radon-local", radon_input="intensity", sift_params=None):
    """Descriptor set of one canonical hand image."""
    if kind not in DESCRIPTOR_CHOICES:
        raise ValidationError(f"descriptor kind must be one of {DESCRIPTOR_CHOICES}, got {kind!r}")
    if radon_input not in ("intensity", "mask"):
        raise ValidationError(f"radon_input must be 'intensity' or 'mask', got {radon_input!r}")
    image = canonical.pixels if radon_input == "intensity" else canonical.mask.astype(float)
    image = check_image(image, (CANONICAL_SIZE, CANONICAL_SIZE))
    if kind == "sift":
        return sift_descriptors(canonical.pixels, canonical.mask, sift_params or SiftParams())
    r = radon_descriptor(image)
    if kind == "radon-local":
        return to_local_rows(r)
    return DescriptorSet(to_global(r)[None, :], "radon-global")


class DescriptorExtractor(TransformerMixin, BaseEstimator):
    """Canonical hand images -> list of DescriptorSets."""

    def __init__(self, kind="radon-local", radon_input="intensity", sift_params=None):
        self.kind = kind
        self.radon_input = radon_input
        self.sift_params = sift_params

    def fit(self, X, y=None):
        return self

    def __sklearn_is_fitted__(self):
        return True

    def transform(self, X):
        return [extract_descriptors(x, self.kind, self.radon_input, self.sift_params) for x in X]


class ProbSomClassifier(ClassifierMixin, BaseEstimator):
    """ProbSom over sets of descriptor vectors.

    ``X`` is a sequence of DescriptorSets (or 2-d arrays, one row per
    vector); ``y`` holds integer class ids. ``decision_function`` returns the
    aggregated class ratios.
    """

    def __init__(self, grid_rows=10, grid_cols=10, epochs=100, initial_learning_rate=0.5,
                 final_learning_rate=0.01, initial_radius=None, final_radius=0.5,
                 random_state=0, n_classes=None, class_names=None):
        self.grid_rows = grid_rows
        self.grid_cols = grid_cols
        self.epochs = epochs
        self.initial_learning_rate = initial_learning_rate
        self.final_learning_rate = final_learning_rate
        self.initial_radius = initial_radius
        self.final_radius = final_radius
        self.random_state = random_state
        self.n_classes = n_classes
        self.class_names = class_names

    def _som_config(self, dim):
        return probsom.SomConfig(
            grid_rows=self.grid_rows, grid_cols=self.grid_cols, vector_dim=dim,
            epochs=self.epochs, initial_learning_rate=self.initial_learning_rate,
            final_learning_rate=self.final_learning_rate, initial_radius=self.initial_radius,
            final_radius=self.final_radius, seed=int(self.random_state or 0))

    def fit(self, X, y):
        sets, dim = check_descriptor_sets(X)
        kinds = {s.source_kind for s in sets}
        if len(kinds) > 1:
            raise ValidationError(f"mixed descriptor kinds in training data: {sorted(map(str, kinds))}")
        kind = kinds.pop() or "radon-local"
        if self.class_names is not None:
            names = list(self.class_names)
        elif self.n_classes is not None:
            names = [str(c) for c in range(self.n_classes)]
        else:
            names = [str(c) for c in range(int(np.max(y)) + 1)]
        y = check_labels(y, len(sets), len(names))
        config = self._som_config(dim)
        grid = probsom.train_som(np.concatenate([s.vectors for s in sets]), config)
        self.model_ = probsom.weight_neurons(grid, list(zip(sets, y)), names, kind, config)
        self.classes_ = np.arange(len(names))
        return self

    @classmethod
    def from_model(cls, model):
        """Wrap an already trained :class:`probsom.ProbSomModel`."""
        cfg = model.config or probsom.SomConfig(*model.grid.shape, model.vector_dim)
        est = cls(grid_rows=cfg.grid_rows, grid_cols=cfg.grid_cols, epochs=cfg.epochs,
                  initial_learning_rate=cfg.initial_learning_rate,
                  final_learning_rate=cfg.final_learning_rate,
                  initial_radius=cfg.initial_radius, final_radius=cfg.final_radius,
                  random_state=cfg.seed, class_names=list(model.class_names))
        est.model_ = model
        est.classes_ = np.arange(model.n_classes)
        return est

    def _sets(self, X):
        check_is_fitted(self, "model_")
        sets, _ = check_descriptor_sets(X, dim=self.model_.vector_dim)
        return sets

    def class_scores(self, X):
        return [probsom.classify(self.model_, s) for s in self._sets(X)]

    def decision_function(self, X):
        return np.array([cs.scores for cs in self.class_scores(X)])

    def predict_proba(self, X):
        scores = self.decision_function(X)
        totals = scores.sum(axis=1, keepdims=True)
        uniform = np.full_like(scores, 1.0 / scores.shape[1])
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, scores / totals, uniform)

    def rankings(self, X):
        return np.array([cs.ranking for cs in self.class_scores(X)])

    def predict(self, X):
        return self.rankings(X)[:, 0]

    def predict_top_k(self, X, k):
        check_is_fitted(self, "model_")
        if not 1 <= k <= self.model_.n_classes:
            raise ValidationError(f"k must lie in [1, {self.model_.n_classes}], got {k}")
        return self.rankings(X)[:, :k]
