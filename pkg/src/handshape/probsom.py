"""ProbSom: a Kohonen map whose neurons carry class-ratio profiles.

Training is plain online SOM training. Afterwards every training vector is
mapped to its best matching unit (BMU), which counts the vector's class.
A sample (a set of vectors) is classified by summing the class ratios of
the BMUs of its vectors and ranking the classes by that sum.
"""

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import DimensionError, EmptySample, EmptyTrainingSet, ModelFormatError, ValidationError

MODEL_FORMAT = "probsom-model"
MODEL_VERSION = 1
DESCRIPTOR_KINDS = ("radon-local", "radon-global", "sift")


@dataclass(frozen=True)
class SomConfig:
    grid_rows: int = 10
    grid_cols: int = 10
    vector_dim: int = 32
    epochs: int = 100
    initial_learning_rate: float = 0.5
    final_learning_rate: float = 0.01
    initial_radius: float = None      # None -> max(grid_rows, grid_cols) / 2
    final_radius: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("grid_rows", "grid_cols", "vector_dim", "epochs"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be a positive integer")
        if not 0 < self.initial_learning_rate <= 1:
            raise ValidationError("initial_learning_rate must lie in (0, 1]")
        if not 0 < self.final_learning_rate <= self.initial_learning_rate:
            raise ValidationError("final_learning_rate must lie in (0, initial_learning_rate]")
        if self.initial_radius is not None and self.initial_radius <= 0:
            raise ValidationError("initial_radius must be positive")
        if self.final_radius <= 0:
            raise ValidationError("final_radius must be positive")

    @property
    def radius0(self):
        if self.initial_radius is None:
            return max(self.grid_rows, self.grid_cols) / 2.0
        return float(self.initial_radius)


@dataclass
class SomGrid:
    weights: np.ndarray   # (grid_rows, grid_cols, vector_dim)

    @property
    def shape(self):
        return self.weights.shape[:2]

    @property
    def n_neurons(self):
        return self.weights.shape[0] * self.weights.shape[1]

    @property
    def vector_dim(self):
        return self.weights.shape[2]

    @property
    def flat(self):
        return self.weights.reshape(self.n_neurons, self.vector_dim)


@dataclass
class ClassScores:
    scores: np.ndarray
    ranking: np.ndarray

    @classmethod
    def from_scores(cls, scores):
        scores = np.asarray(scores, dtype=float)
        return cls(scores, rank_classes(scores))


def rank_classes(scores):
    """Class indices by descending score; equal scores keep ascending index order."""
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


@njit(cache=True, nogil=True)
def _bmu(weights, x):
    best = 0
    best_d = np.inf
    for j in range(weights.shape[0]):
        d = 0.0
        for k in range(weights.shape[1]):
            diff = x[k] - weights[j, k]
            d += diff * diff
        if d < best_d:
            best_d = d
            best = j
    return best


@njit(cache=True, nogil=True)
def _bmu_batch(weights, data):
    out = np.empty(data.shape[0], dtype=np.int64)
    for i in range(data.shape[0]):
        out[i] = _bmu(weights, data[i])
    return out


@njit(cache=True, nogil=True)
def _train(weights, coords, data, order, lr0, lr1, rad0, rad1):
    n_steps = order.shape[0] * order.shape[1]
    denom = max(n_steps - 1, 1)
    step = 0
    for e in range(order.shape[0]):
        for i in range(order.shape[1]):
            x = data[order[e, i]]
            t = step / denom
            lr = lr0 * (lr1 / lr0) ** t
            rad = rad0 * (rad1 / rad0) ** t
            b = _bmu(weights, x)
            rad2 = rad * rad
            for j in range(weights.shape[0]):
                dr = coords[j, 0] - coords[b, 0]
                dc = coords[j, 1] - coords[b, 1]
                g2 = dr * dr + dc * dc
                if g2 <= rad2:
                    h = lr * np.exp(-g2 / (2.0 * rad2))
                    for k in range(weights.shape[1]):
                        weights[j, k] += h * (x[k] - weights[j, k])
            step += 1


def _as_matrix(vectors, dim=None):
    data = np.asarray(vectors, dtype=float)
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2:
        raise DimensionError(f"expected a list of vectors, got array of shape {data.shape}")
    if dim is not None and data.shape[1] != dim:
        raise DimensionError(f"vector dimension {data.shape[1]} does not match {dim}")
    if not np.all(np.isfinite(data)):
        raise ValidationError("vectors contain non-finite values")
    return np.ascontiguousarray(data)


def _vectors_of(sample):
    return sample.vectors if hasattr(sample, "vectors") else sample


def train_som(vectors, config):
    """Online Kohonen training; deterministic for a given ``config.seed``.

    Learning rate and neighborhood radius decay exponentially per step. A
    neuron is updated when its grid distance to the BMU is within the current
    radius, with Gaussian weight ``exp(-d^2 / (2 r^2))``.
    """
    if len(vectors) == 0:
        raise EmptyTrainingSet("no training vectors")
    data = _as_matrix(vectors, config.vector_dim)
    n = data.shape[0]
    rng = np.random.default_rng(config.seed)
    n_neurons = config.grid_rows * config.grid_cols
    init = rng.choice(n, size=n_neurons, replace=n < n_neurons)
    weights = data[init].copy()
    coords = np.array([(r, c) for r in range(config.grid_rows) for c in range(config.grid_cols)],
                      dtype=float)
    order = np.stack([rng.permutation(n) for _ in range(config.epochs)])
    _train(weights, coords, data, order, float(config.initial_learning_rate),
           float(config.final_learning_rate), config.radius0, float(config.final_radius))
    return SomGrid(weights.reshape(config.grid_rows, config.grid_cols, config.vector_dim))


def best_matching_unit(grid, v):
    """Row-major index of the nearest neuron; ties go to the smaller index."""
    v = np.asarray(v, dtype=float)
    if v.shape != (grid.vector_dim,):
        raise DimensionError(f"vector dimension {v.shape} does not match {grid.vector_dim}")
    return int(_bmu(np.ascontiguousarray(grid.flat), v))


def best_matching_units(grid, vectors):
    data = _as_matrix(vectors, grid.vector_dim)
    return _bmu_batch(np.ascontiguousarray(grid.flat), data)


@dataclass
class ProbSomModel:
    grid: SomGrid
    class_counts: np.ndarray            # (n_neurons, n_classes) integer hits
    class_names: list
    descriptor_kind: str = "radon-local"
    config: SomConfig = None

    def __post_init__(self):
        self.class_counts = np.asarray(self.class_counts, dtype=np.int64)
        if self.class_counts.shape != (self.grid.n_neurons, len(self.class_names)):
            raise DimensionError(
                f"class counts {self.class_counts.shape} do not match "
                f"{self.grid.n_neurons} neurons x {len(self.class_names)} classes")
        if self.descriptor_kind not in DESCRIPTOR_KINDS:
            raise ValidationError(f"unknown descriptor kind {self.descriptor_kind!r}")
        hits = self.class_counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.ratios = np.where(hits[:, None] > 0, self.class_counts / hits[:, None], 0.0)

    @property
    def hit_counts(self):
        return self.class_counts.sum(axis=1)

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def vector_dim(self):
        return self.grid.vector_dim


def weight_neurons(grid, samples, class_names, descriptor_kind="radon-local", config=None):
    """Count, per neuron, the classes of the training vectors it wins."""
    if len(samples) == 0:
        raise EmptyTrainingSet("no training samples")
    n_classes = len(class_names)
    counts = np.zeros((grid.n_neurons, n_classes), dtype=np.int64)
    for sample, class_id in samples:
        if not 0 <= int(class_id) < n_classes:
            raise ValidationError(f"class id {class_id} outside [0, {n_classes})")
        bmus = best_matching_units(grid, _vectors_of(sample))
        np.add.at(counts[:, int(class_id)], bmus, 1)
    return ProbSomModel(grid, counts, list(class_names), descriptor_kind, config)


def _check_kind(model, sample):
    kind = getattr(sample, "source_kind", None)
    if kind is None:
        return
    if kind != model.descriptor_kind:
        raise ValidationError(
            f"descriptor kind {kind!r} does not match the model's {model.descriptor_kind!r}")


def classify(model, sample):
    """Sum of BMU class ratios over the vectors of ``sample``.

    Sums are correctly rounded (``math.fsum``), so the result does not
    depend on vector order.
    """
    _check_kind(model, sample)
    vectors = _vectors_of(sample)
    if len(vectors) == 0:
        raise EmptySample("descriptor set is empty")
    bmus = best_matching_units(model.grid, vectors)
    picked = model.ratios[bmus]
    scores = np.array([math.fsum(picked[:, c]) for c in range(model.n_classes)])
    return ClassScores.from_scores(scores)


def predict_top_k(model, sample, k):
    if not 1 <= k <= model.n_classes:
        raise ValidationError(f"k must lie in [1, {model.n_classes}], got {k}")
    return [int(c) for c in classify(model, sample).ranking[:k]]


def model_to_dict(model):
    rows, cols = model.grid.shape
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "descriptor_kind": model.descriptor_kind,
        "grid_rows": rows,
        "grid_cols": cols,
        "vector_dim": model.vector_dim,
        "class_names": list(model.class_names),
        "config": asdict(model.config) if model.config is not None else None,
        "weights": model.grid.flat.tolist(),
        "hit_counts": model.hit_counts.tolist(),
        "class_counts": model.class_counts.tolist(),
    }


def model_from_dict(d):
    if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a ProbSom model document")
    if d.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}")
    try:
        rows, cols, dim = int(d["grid_rows"]), int(d["grid_cols"]), int(d["vector_dim"])
        names = list(d["class_names"])
        weights = np.array(d["weights"], dtype=float)
        counts = np.array(d["class_counts"], dtype=np.int64)
        hits = np.array(d["hit_counts"], dtype=np.int64)
        config = SomConfig(**d["config"]) if d.get("config") else None
        kind = d["descriptor_kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from None
    n_neurons = rows * cols
    if weights.shape != (n_neurons, dim):
        raise ModelFormatError(f"weights shape {weights.shape} != ({n_neurons}, {dim})")
    if counts.shape != (n_neurons, len(names)):
        raise ModelFormatError(
            f"profile count {counts.shape[0] if counts.ndim else 0} does not match "
            f"{n_neurons} neurons x {len(names)} classes")
    if hits.shape != (n_neurons,) or np.any(hits != counts.sum(axis=1)):
        raise ModelFormatError("hit counts disagree with class counts")
    if np.any(counts < 0) or not np.all(np.isfinite(weights)):
        raise ModelFormatError("negative counts or non-finite weights")
    if kind not in DESCRIPTOR_KINDS:
        raise ModelFormatError(f"unknown descriptor kind {kind!r}")
    return ProbSomModel(SomGrid(weights.reshape(rows, cols, dim)), counts, names, kind, config)


def save_model(model, path):
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path):
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"corrupt model file {path}: {exc}") from None
    return model_from_dict(d)
