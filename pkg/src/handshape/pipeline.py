"""Run configuration, batch processing and on-disk formats.

Canonical images are stored as 16-bit grayscale PNGs next to 8-bit mask
and contour PNGs. Descriptors are stored as one JSON document per corpus,
one record per sample.
"""

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import GloveFilterConfig, default_glove_config, load_rgb, segment_image
from .errors import HandshapeError, ValidationError
from .estimators import DESCRIPTOR_CHOICES, extract_descriptors
from .preprocess import CanonicalHandImage, canonicalize
from .radon import DescriptorSet

log = logging.getLogger(__name__)

DESCRIPTOR_FORMAT = "handshape-descriptors"
DESCRIPTOR_VERSION = 1


@dataclass
class RunConfig:
    manifest: str = None
    output_dir: str = "out"
    model: str = None
    descriptor: str = "radon-local"
    radon_input: str = "intensity"
    segmentation: str = "auto"
    glove: dict = field(default_factory=lambda: default_glove_config().to_dict())
    som: dict = field(default_factory=dict)
    protocol: str = "random-cv"
    repetitions: int = 30
    test_fraction: float = 0.1
    seed: int = 0
    jobs: int = 1
    debug_stages: bool = False
    top_k: int = 2
    class_names: list = None     # None -> the 16 LSA16 classes

    def __post_init__(self):
        if self.descriptor not in DESCRIPTOR_CHOICES:
            raise ValidationError(f"descriptor must be one of {DESCRIPTOR_CHOICES}")
        if self.protocol not in ("random-cv", "inter-subject"):
            raise ValidationError("protocol must be 'random-cv' or 'inter-subject'")
        if self.segmentation not in ("auto", "glove", "segmented"):
            raise ValidationError("segmentation must be 'auto', 'glove' or 'segmented'")
        if self.radon_input not in ("intensity", "mask"):
            raise ValidationError("radon_input must be 'intensity' or 'mask'")
        GloveFilterConfig.from_dict(self.glove)

    @property
    def glove_config(self):
        return GloveFilterConfig.from_dict(self.glove)

    @classmethod
    def from_file(cls, path, **overrides):
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def to_dict(self):
        return asdict(self)


def canonical_paths(out_dir, sample_id):
    out_dir = Path(out_dir)
    return {"pixels": out_dir / f"{sample_id}_canonical.png",
            "mask": out_dir / f"{sample_id}_mask.png",
            "contour": out_dir / f"{sample_id}_contour.png"}


def _to_png16(arr):
    return Image.fromarray(np.round(np.clip(arr, 0.0, 1.0) * 65535).astype(np.uint16))


def _to_png8(arr):
    return Image.fromarray(np.round(np.clip(arr, 0.0, 1.0) * 255).astype(np.uint8))


def save_canonical(canonical, out_dir, sample_id):
    paths = canonical_paths(out_dir, sample_id)
    _to_png16(canonical.pixels).save(paths["pixels"])
    _to_png8(canonical.mask.astype(float)).save(paths["mask"])
    _to_png8(canonical.contour.astype(float)).save(paths["contour"])
    return paths


def load_canonical(out_dir, sample_id):
    paths = canonical_paths(out_dir, sample_id)
    for p in paths.values():
        if not p.is_file():
            raise FileNotFoundError(f"missing canonical image {p}")
    with Image.open(paths["pixels"]) as im:
        pixels = np.asarray(im, dtype=np.float64) / 65535.0
    with Image.open(paths["mask"]) as im:
        mask = np.asarray(im) > 127
    with Image.open(paths["contour"]) as im:
        contour = np.asarray(im) > 127
    return CanonicalHandImage(pixels, mask, contour)


def save_stages(canonical, out_dir, sample_id):
    """Write the five debug stage images of one sample."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, (name, img) in enumerate(canonical.stages.items(), start=1):
        path = out_dir / f"{sample_id}_stage{i}_{name}.png"
        _to_png8(img).save(path)
        written.append(path)
    return written


def canonicalize_file(path, config, keep_stages=False):
    rgb = load_rgb(path)
    seg = segment_image(rgb, config.glove_config, config.segmentation)
    return canonicalize(seg, keep_stages=keep_stages)


def map_items(func, items, jobs=1):
    """Apply ``func`` to each item, catching per-item failures.

    Returns ``(results, failures)`` where failed items get ``None`` in
    ``results`` and an entry ``(index, message)`` in ``failures``. Output
    order never depends on ``jobs``.
    """
    def safe(args):
        i, item = args
        try:
            return func(item), None
        except (HandshapeError, OSError, ValueError) as exc:
            return None, (i, f"{type(exc).__name__}: {exc}")

    pairs = list(enumerate(items))
    if jobs == 1:
        out = [safe(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=jobs if jobs > 0 else None) as pool:
            out = list(pool.map(safe, pairs))
    return [r for r, _ in out], [f for _, f in out if f is not None]


def descriptors_for_dataset(dataset, config, canonical_dir=None, jobs=1):
    """Descriptor set per record, from stored canonical images or from the raw images."""
    def one(record):
        if canonical_dir is not None:
            canonical = load_canonical(canonical_dir, record.sample_id)
        else:
            canonical = canonicalize_file(record.image_path, config)
        return extract_descriptors(canonical, config.descriptor, config.radon_input)

    return map_items(one, dataset.records, jobs)


def write_descriptors(path, dataset, descriptor_sets, kind):
    records = []
    for rec, ds in zip(dataset.records, descriptor_sets):
        if ds is None:
            continue
        records.append({
            "sample_id": rec.sample_id,
            "path": str(rec.image_path),
            "class": rec.class_id,
            "subject": rec.subject_id,
            "repetition": rec.repetition,
            "vectors": ds.vectors.tolist(),
        })
    doc = {"format": DESCRIPTOR_FORMAT, "version": DESCRIPTOR_VERSION, "descriptor_kind": kind,
           "class_names": list(dataset.class_names), "records": records}
    Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")


def write_descriptors_csv(path, dataset, descriptor_sets):
    """Flat CSV: one row per vector, keyed by sample id and vector index."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        header_written = False
        for rec, ds in zip(dataset.records, descriptor_sets):
            if ds is None:
                continue
            if not header_written:
                w.writerow(["sample_id", "vector"] + [f"v{j}" for j in range(ds.dim)])
                header_written = True
            for i, v in enumerate(ds.vectors):
                w.writerow([rec.sample_id, i] + [repr(float(x)) for x in v])


def read_descriptors(path):
    """Load a descriptor document: (Dataset, list of DescriptorSet, kind)."""
    from .dataset import Dataset, SampleRecord

    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"corrupt descriptor file {path}: {exc}") from None
    if doc.get("format") != DESCRIPTOR_FORMAT or doc.get("version") != DESCRIPTOR_VERSION:
        raise ValidationError(f"{path} is not a version {DESCRIPTOR_VERSION} descriptor file")
    kind = doc["descriptor_kind"]
    records, sets = [], []
    for r in doc["records"]:
        records.append(SampleRecord(Path(r["path"]), int(r["class"]), int(r["subject"]),
                                    int(r["repetition"])))
        sets.append(DescriptorSet(np.array(r["vectors"], dtype=float), kind))
    return Dataset(records, list(doc["class_names"])), sets, kind
