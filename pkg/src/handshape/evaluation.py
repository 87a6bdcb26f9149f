"""Evaluation protocols: repeated stratified holdout and leave-one-subject-out.

Every protocol produces an :class:`EvaluationReport`. Per-fold randomness
comes from seeds derived from a base seed and the fold's coordinates, so
results do not depend on execution order or worker count.
"""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone

from .errors import DimensionError, HandshapeError, ValidationError
from .probsom import rank_classes

PROTOCOLS = ("random-cv", "inter-subject")


@dataclass(frozen=True)
class SplitSpec:
    train_indices: tuple
    test_indices: tuple

    def __post_init__(self):
        train = tuple(int(i) for i in self.train_indices)
        test = tuple(int(i) for i in self.test_indices)
        if not test:
            raise ValidationError("test split is empty")
        if set(train) & set(test):
            raise ValidationError("train and test indices overlap")
        object.__setattr__(self, "train_indices", train)
        object.__setattr__(self, "test_indices", test)


def _labels_of(data):
    return data.labels if hasattr(data, "labels") else np.asarray(data, dtype=int)


def derive_seed(base_seed, *coords):
    """Independent 32-bit seed for the fold at ``coords``."""
    return int(np.random.SeedSequence([int(base_seed), *map(int, coords)]).generate_state(1)[0])


def stratified_random_split(dataset, test_fraction=0.1, seed=0):
    """Per class, hold out ``round(test_fraction * n_class)`` samples.

    ``dataset`` is a Dataset or an array of class labels.
    """
    labels = _labels_of(dataset)
    if not 0 < test_fraction < 1:
        raise ValidationError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if labels.size == 0:
        raise ValidationError("cannot split an empty dataset")
    need = math.ceil(1.0 / test_fraction - 1e-9)
    rng = np.random.default_rng(seed)
    test = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < need:
            raise ValidationError(
                f"class {c} has {idx.size} samples; stratifying with test_fraction "
                f"{test_fraction} needs at least {need}")
        n_test = int(math.floor(test_fraction * idx.size + 0.5))
        test.extend(rng.choice(idx, size=n_test, replace=False).tolist())
    test = sorted(test)
    held = set(test)
    train = [i for i in range(labels.size) if i not in held]
    return SplitSpec(tuple(train), tuple(test))


def leave_one_subject_out(dataset):
    """One split per subject, in ascending subject order."""
    subjects = dataset.subjects if hasattr(dataset, "subjects") else np.asarray(dataset, int)
    unique = np.unique(subjects)
    if unique.size < 2:
        raise ValidationError("leave-one-subject-out needs at least two subjects")
    return [SplitSpec(tuple(np.flatnonzero(subjects != s)), tuple(np.flatnonzero(subjects == s)))
            for s in unique]


def _check_ranking(ranking, n_classes=None):
    ranking = np.asarray(ranking)
    n = n_classes or ranking.size
    if ranking.ndim != 1 or ranking.size != n or not np.array_equal(np.sort(ranking), np.arange(n)):
        raise ValidationError(f"ranking is not a permutation of 0..{n - 1}: {ranking.tolist()}")
    return ranking


def top_k_accuracy(predictions, k):
    """Fraction of ``(ranking, true_class)`` pairs with the true class in the top ``k``."""
    if len(predictions) == 0:
        raise ValidationError("no predictions")
    hits = 0
    n_classes = None
    for ranking, true in predictions:
        ranking = _check_ranking(ranking, n_classes)
        n_classes = ranking.size
        if not 1 <= k <= n_classes:
            raise ValidationError(f"k must lie in [1, {n_classes}], got {k}")
        hits += int(true) in ranking[:k].tolist()
    return hits / len(predictions)


def knn_baseline(train_X, train_y, test_X, k_neighbors=1):
    """Majority vote of the ``k_neighbors`` nearest training vectors.

    Ties between classes go to the class of the nearest neighbor among the
    tied classes; equidistant neighbors keep training order.
    """
    train_X = np.asarray(train_X, dtype=float)
    test_X = np.asarray(test_X, dtype=float)
    train_y = np.asarray(train_y, dtype=int)
    if train_X.ndim != 2 or test_X.ndim != 2 or train_X.shape[1] != test_X.shape[1]:
        raise DimensionError(f"incompatible shapes {train_X.shape} and {test_X.shape}")
    if not 1 <= k_neighbors <= train_X.shape[0]:
        raise ValidationError(f"k_neighbors must lie in [1, {train_X.shape[0]}]")
    preds = []
    for x in test_X:
        d = ((train_X - x) ** 2).sum(axis=1)
        order = np.argsort(d, kind="stable")[:k_neighbors]
        votes = np.bincount(train_y[order])
        tied = set(np.flatnonzero(votes == votes.max()).tolist())
        preds.append(next(int(train_y[i]) for i in order if train_y[i] in tied))
    return np.array(preds, dtype=int)


class KNNBaseline(ClassifierMixin, BaseEstimator):
    """Estimator wrapper over :func:`knn_baseline` on flattened descriptor sets."""

    def __init__(self, k_neighbors=1, n_classes=16):
        self.k_neighbors = k_neighbors
        self.n_classes = n_classes

    @staticmethod
    def _flatten(X):
        return np.array([np.asarray(getattr(x, "vectors", x), dtype=float).ravel() for x in X])

    def fit(self, X, y):
        self.train_X_ = self._flatten(X)
        self.train_y_ = np.asarray(y, dtype=int)
        self.classes_ = np.arange(self.n_classes)
        return self

    def rankings(self, X):
        test_X = self._flatten(X)
        preds = knn_baseline(self.train_X_, self.train_y_, test_X, self.k_neighbors)
        out = []
        for x, pred in zip(test_X, preds):
            d = ((self.train_X_ - x) ** 2).sum(axis=1)
            order = np.argsort(d, kind="stable")[:self.k_neighbors]
            votes = np.bincount(self.train_y_[order], minlength=self.n_classes).astype(float)
            votes[pred] += 0.5
            out.append(rank_classes(votes))
        return np.array(out)

    def predict(self, X):
        return self.rankings(X)[:, 0]


def _rankings(estimator, X, n_classes):
    if hasattr(estimator, "rankings"):
        return np.asarray(estimator.rankings(X))
    if hasattr(estimator, "decision_function"):
        return np.array([rank_classes(s) for s in np.asarray(estimator.decision_function(X))])
    out = []
    for p in estimator.predict(X):
        rest = [c for c in range(n_classes) if c != int(p)]
        out.append([int(p)] + rest)
    return np.array(out)


@dataclass
class FoldResult:
    fold_id: str
    repetition: int
    subject: int
    test_indices: list
    true: list
    rankings: list

    @property
    def accuracy(self):
        return float(np.mean([r[0] == t for r, t in zip(self.rankings, self.true)]))


@dataclass
class EvaluationReport:
    protocol: str
    per_fold_accuracy: list
    mean: float
    std_dev: float
    per_class_accuracy: list
    confusion: list
    top_k_accuracy: dict
    fold_ids: list = field(default_factory=list)
    per_subject_accuracy: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["top_k_accuracy"] = {str(k): v for k, v in self.top_k_accuracy.items()}
        d["per_subject_accuracy"] = {str(k): v for k, v in self.per_subject_accuracy.items()}
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _sample_std(values):
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1)) if values.size > 1 else 0.0


def aggregate(folds, protocol, n_classes, config=None):
    """Reduce fold results into an :class:`EvaluationReport`."""
    per_fold = [f.accuracy for f in folds]
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    predictions = []
    for f in folds:
        for ranking, true in zip(f.rankings, f.true):
            confusion[true, ranking[0]] += 1
            predictions.append((ranking, true))
    row_sums = confusion.sum(axis=1)
    per_class = [float(confusion[c, c] / row_sums[c]) if row_sums[c] else None
                 for c in range(n_classes)]
    top_k = {k: top_k_accuracy(predictions, k) for k in range(1, n_classes + 1)}
    per_subject = {}
    if protocol == "inter-subject":
        subjects = sorted({f.subject for f in folds})
        per_subject = {s: float(np.mean([f.accuracy for f in folds if f.subject == s]))
                       for s in subjects}
    return EvaluationReport(
        protocol=protocol,
        per_fold_accuracy=per_fold,
        mean=float(np.mean(per_fold)),
        std_dev=_sample_std(per_fold),
        per_class_accuracy=per_class,
        confusion=confusion.tolist(),
        top_k_accuracy=top_k,
        fold_ids=[f.fold_id for f in folds],
        per_subject_accuracy=per_subject,
        config=dict(config or {}),
    )


def _run_fold(job, features, labels, estimator, n_classes):
    fold_id, rep, subject, split, est_seed = job
    est = clone(estimator) if hasattr(estimator, "get_params") else estimator
    if hasattr(est, "get_params") and "random_state" in est.get_params():
        est.set_params(random_state=est_seed)
    try:
        est.fit([features[i] for i in split.train_indices], labels[list(split.train_indices)])
        rankings = _rankings(est, [features[i] for i in split.test_indices], n_classes)
    except HandshapeError as exc:
        raise type(exc)(f"fold {fold_id}: {exc}") from exc
    return FoldResult(fold_id, rep, subject, list(split.test_indices),
                      labels[list(split.test_indices)].tolist(),
                      [[int(c) for c in r] for r in rankings])


def run_protocol(features, dataset, protocol="random-cv", repetitions=30, seed=0,
                 estimator=None, test_fraction=0.1, n_jobs=1, config=None):
    """Train and test ``estimator`` on every fold of ``protocol``.

    ``features[i]`` is the classifier input for ``dataset.records[i]``.
    Random CV draws ``repetitions`` independent stratified holdouts;
    inter-subject repeats the leave-one-subject-out folds ``repetitions``
    times with different estimator seeds.
    """
    from .estimators import ProbSomClassifier

    if protocol not in PROTOCOLS:
        raise ValidationError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    if repetitions < 1:
        raise ValidationError("repetitions must be positive")
    if len(features) != len(dataset):
        raise ValidationError(f"{len(features)} feature sets for {len(dataset)} samples")
    labels = dataset.labels
    n_classes = dataset.n_classes
    if estimator is None:
        estimator = ProbSomClassifier(class_names=list(dataset.class_names))

    jobs = []
    for rep in range(repetitions):
        if protocol == "random-cv":
            split = stratified_random_split(labels, test_fraction, derive_seed(seed, rep, 0))
            jobs.append((f"rep{rep:02d}", rep, -1, split, derive_seed(seed, rep, 1)))
        else:
            subjects = np.unique(dataset.subjects)
            for subject, split in zip(subjects, leave_one_subject_out(dataset)):
                jobs.append((f"rep{rep:02d}/subject{subject:02d}", rep, int(subject), split,
                             derive_seed(seed, rep, 1, subject)))

    def work(job):
        return _run_fold(job, features, labels, estimator, n_classes)

    if n_jobs == 1:
        folds = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
            folds = list(pool.map(work, jobs))

    snapshot = {"protocol": protocol, "repetitions": repetitions, "seed": seed,
                "test_fraction": test_fraction if protocol == "random-cv" else None}
    if hasattr(estimator, "get_params"):
        snapshot["estimator"] = {"class": type(estimator).__name__,
                                 **{k: _jsonable(v) for k, v in estimator.get_params().items()}}
    snapshot.update(config or {})
    return aggregate(folds, protocol, n_classes, snapshot)


def _jsonable(value):
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, np.generic):
        return value.item()
    return repr(value)


def write_report(report, out_dir, prefix="report"):
    """Write JSON, per-fold CSV, confusion CSV and (inter-subject) per-subject CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"json": out_dir / f"{prefix}.json", "folds": out_dir / f"{prefix}_folds.csv",
             "confusion": out_dir / f"{prefix}_confusion.csv"}
    paths["json"].write_text(report.to_json(), encoding="utf-8")
    with open(paths["folds"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["fold", "accuracy"])
        for fold_id, acc in zip(report.fold_ids, report.per_fold_accuracy):
            w.writerow([fold_id, repr(acc)])
    with open(paths["confusion"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        n = len(report.confusion)
        w.writerow(["true\\predicted"] + list(range(n)))
        for c, row in enumerate(report.confusion):
            w.writerow([c] + row)
    if report.per_subject_accuracy:
        paths["subjects"] = out_dir / f"{prefix}_subjects.csv"
        with open(paths["subjects"], "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["subject", "accuracy"])
            for s, acc in report.per_subject_accuracy.items():
                w.writerow([s, repr(acc)])
    return paths
