"""Corpus loading and glove-color segmentation.

A corpus is described by a manifest CSV with header ``path,class,subject,repetition``.
Relative paths are resolved against the manifest's directory.
"""

import csv
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image
from skimage.color import rgb2hsv

from .errors import ParseError, SegmentationEmpty, ValidationError

N_CLASSES = 16
N_SUBJECTS = 10
N_REPETITIONS = 5

LSA16_CLASS_NAMES = [f"class_{i:02d}" for i in range(N_CLASSES)]

MANIFEST_HEADER = ["path", "class", "subject", "repetition"]

# RGB -> luminance (ITU-R BT.601)
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class SampleRecord:
    image_path: Path
    class_id: int
    subject_id: int
    repetition: int

    @property
    def sample_id(self):
        return f"c{self.class_id:02d}_s{self.subject_id:02d}_r{self.repetition:02d}"


@dataclass
class Dataset:
    records: list
    class_names: list = field(default_factory=lambda: list(LSA16_CLASS_NAMES))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        return self.records[idx]

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def labels(self):
        return np.array([r.class_id for r in self.records], dtype=int)

    @property
    def subjects(self):
        return np.array([r.subject_id for r in self.records], dtype=int)

    def subset(self, indices):
        return Dataset([self.records[i] for i in indices], list(self.class_names))


@dataclass(frozen=True)
class GloveFilterConfig:
    """HSV window selecting glove pixels.

    ``hue_range`` is in degrees; a range with ``lo > hi`` wraps through 0.
    """

    hue_range: tuple = (40.0, 160.0)
    min_saturation: float = 0.35
    min_value: float = 0.25

    def __post_init__(self):
        lo, hi = self.hue_range
        if not (0 <= lo < 360 and 0 <= hi < 360):
            raise ValidationError(f"hue_range endpoints must lie in [0, 360), got {self.hue_range}")
        if not 0 <= self.min_saturation <= 1:
            raise ValidationError(f"min_saturation must lie in [0, 1], got {self.min_saturation}")
        if not 0 <= self.min_value <= 1:
            raise ValidationError(f"min_value must lie in [0, 1], got {self.min_value}")
        object.__setattr__(self, "hue_range", (float(lo), float(hi)))

    @classmethod
    def from_dict(cls, d):
        return cls(
            hue_range=tuple(d.get("hue_range", cls.hue_range)),
            min_saturation=d.get("min_saturation", cls.min_saturation),
            min_value=d.get("min_value", cls.min_value),
        )

    def to_dict(self):
        return {
            "hue_range": list(self.hue_range),
            "min_saturation": self.min_saturation,
            "min_value": self.min_value,
        }


def default_glove_config():
    """The shipped glove filter (``data/glove_filter.json``)."""
    text = resources.files("handshape").joinpath("data/glove_filter.json").read_text()
    return GloveFilterConfig.from_dict(json.loads(text))


@dataclass
class SegmentedImage:
    """Grayscale hand image on a black background, plus its mask.

    ``rgb`` keeps the masked color image when the segmentation came from one.
    """

    pixels: np.ndarray
    mask: np.ndarray
    rgb: np.ndarray = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        self.mask = np.asarray(self.mask).astype(bool)
        if self.pixels.shape != self.mask.shape:
            raise ValidationError(
                f"pixels {self.pixels.shape} and mask {self.mask.shape} differ in shape")


def _parse_int(value, name, row):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ParseError(f"{name} is not an integer: {value!r}", row=row) from None


def load_manifest(manifest_path, class_names=None, n_subjects=N_SUBJECTS,
                  n_repetitions=N_REPETITIONS, check_files=True):
    """Read a manifest CSV into a :class:`Dataset`.

    Row numbers in error messages count the header as row 1.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    class_names = list(LSA16_CLASS_NAMES if class_names is None else class_names)
    n_classes = len(class_names)
    base = manifest_path.parent

    records = []
    seen = {}
    with open(manifest_path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ParseError("missing header", row=1)
        if [h.strip() for h in header] != MANIFEST_HEADER:
            raise ParseError(f"expected header {','.join(MANIFEST_HEADER)}, got {','.join(header)}",
                             row=1)
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", row=row_no)
            path = Path(row[0].strip())
            if not path.is_absolute():
                path = base / path
            class_id = _parse_int(row[1], "class", row_no)
            subject_id = _parse_int(row[2], "subject", row_no)
            repetition = _parse_int(row[3], "repetition", row_no)
            for name, value, hi in (("class", class_id, n_classes),
                                    ("subject", subject_id, n_subjects),
                                    ("repetition", repetition, n_repetitions)):
                if not 0 <= value < hi:
                    raise ValidationError(f"row {row_no}: {name}={value} outside [0, {hi})")
            key = (class_id, subject_id, repetition)
            if key in seen:
                raise ValidationError(
                    f"row {row_no}: duplicate (class, subject, repetition) {key}, "
                    f"first seen at row {seen[key]}")
            seen[key] = row_no
            if check_files and not path.is_file():
                raise ValidationError(f"row {row_no}: image not found: {path}")
            records.append(SampleRecord(path, class_id, subject_id, repetition))
    return Dataset(records, class_names)


def write_manifest(dataset, manifest_path):
    manifest_path = Path(manifest_path)
    base = manifest_path.parent.resolve()
    with open(manifest_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for r in dataset.records:
            path = Path(r.image_path).resolve()
            try:
                path = path.relative_to(base)
            except ValueError:
                pass
            writer.writerow([path.as_posix(), r.class_id, r.subject_id, r.repetition])


# LSA16 files are named <class>_<subject>_<repetition>.png, all 1-based.
LSA16_NAME_PATTERN = r"^(?P<cls>\d+)_(?P<subject>\d+)_(?P<repetition>\d+)\.(png|jpg|jpeg|bmp|tif|tiff)$"


def manifest_from_directory(image_dir, pattern=LSA16_NAME_PATTERN, one_based=True,
                            class_names=None):
    """Build a Dataset by parsing file names under ``image_dir``.

    Files that do not match ``pattern`` are ignored.
    """
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise FileNotFoundError(f"not a directory: {image_dir}")
    regex = re.compile(pattern, re.IGNORECASE)
    offset = 1 if one_based else 0
    records = []
    for path in sorted(image_dir.rglob("*")):
        m = regex.match(path.name)
        if m is None or not path.is_file():
            continue
        records.append(SampleRecord(path, int(m["cls"]) - offset, int(m["subject"]) - offset,
                                    int(m["repetition"]) - offset))
    records.sort(key=lambda r: (r.class_id, r.subject_id, r.repetition))
    return Dataset(records, list(LSA16_CLASS_NAMES if class_names is None else class_names))


def load_rgb(path):
    """Decode an image file to a float RGB array in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return arr.astype(float) / 255.0


def to_grayscale(rgb):
    return np.asarray(rgb, dtype=float)[..., :3] @ LUMA_WEIGHTS


def glove_predicate(rgb, config):
    """Boolean map of pixels inside the HSV window."""
    hsv = rgb2hsv(np.asarray(rgb, dtype=float)[..., :3])
    hue = hsv[..., 0] * 360.0
    lo, hi = config.hue_range
    if lo <= hi:
        in_hue = (hue >= lo) & (hue <= hi)
    else:
        in_hue = (hue >= lo) | (hue <= hi)
    return in_hue & (hsv[..., 1] >= config.min_saturation) & (hsv[..., 2] >= config.min_value)


def segment_glove(rgb_image, config=None):
    rgb = np.asarray(rgb_image, dtype=float)
    if rgb.ndim != 3 or rgb.shape[2] < 3 or rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ValidationError(f"expected a non-empty HxWx3 image, got shape {rgb.shape}")
    rgb = rgb[..., :3]
    config = config or default_glove_config()
    mask = glove_predicate(rgb, config)
    if not mask.any():
        raise SegmentationEmpty("no pixel passed the glove color filter")
    masked_rgb = rgb * mask[..., None]
    return SegmentedImage(to_grayscale(masked_rgb), mask, masked_rgb)


def is_black_background(rgb, border_fraction=0.95):
    """True when almost every border pixel is exactly black."""
    rgb = np.asarray(rgb, dtype=float)
    border = np.concatenate([rgb[0], rgb[-1], rgb[:, 0], rgb[:, -1]])
    return np.mean(border.max(axis=-1) == 0) >= border_fraction


def segment_image(rgb, config=None, mode="auto"):
    """Segment an RGB image.

    ``mode`` is ``"glove"`` (color filter), ``"segmented"`` (input already has a
    black background) or ``"auto"`` (pick one by inspecting the border).
    """
    rgb = np.asarray(rgb, dtype=float)[..., :3]
    if mode not in ("auto", "glove", "segmented"):
        raise ValidationError(f"unknown segmentation mode {mode!r}")
    if mode == "auto":
        mode = "segmented" if is_black_background(rgb) else "glove"
    if mode == "glove":
        return segment_glove(rgb, config)
    mask = rgb.max(axis=-1) > 0
    if not mask.any():
        raise SegmentationEmpty("image is entirely black")
    return SegmentedImage(to_grayscale(rgb), mask, rgb)
