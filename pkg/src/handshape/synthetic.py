"""Synthetic glove-colored hand silhouettes.

Shapes are unions of an elliptical palm and capsule-shaped fingers, defined
in a hand frame with x to the right and y pointing from wrist to fingertips.
They are used for tests, demos and the offline acceptance checks.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .dataset import SampleRecord, Dataset, write_manifest


@dataclass(frozen=True)
class Finger:
    base: tuple      # (x, y) in hand units
    angle: float     # degrees from the +y axis, positive toward -x
    length: float
    radius: float = 5.0

    def tip(self):
        a = np.radians(self.angle)
        return (self.base[0] - self.length * np.sin(a), self.base[1] + self.length * np.cos(a))


@dataclass(frozen=True)
class HandTemplate:
    name: str
    fingers: tuple
    palm: tuple = (22.0, 27.0)   # ellipse semi-axes (x, y)


def _four(lengths, spread=6.0, y=18.0):
    xs = (-15.0, -5.0, 5.0, 15.0)
    angles = (1.5 * spread, 0.5 * spread, -0.5 * spread, -1.5 * spread)
    return tuple(Finger((x, y), a, l) for x, a, l in zip(xs, angles, lengths) if l > 0)


THUMB = Finger((-18.0, -4.0), 55.0, 26.0, 5.5)

TEMPLATES = {
    "fist": HandTemplate("fist", (Finger((-12.0, 8.0), 70.0, 14.0, 6.0),)),
    "index": HandTemplate("index", _four((0, 52, 0, 0))),
    "v": HandTemplate("v", (Finger((-6.0, 18.0), 14.0, 52.0), Finger((6.0, 18.0), -14.0, 52.0))),
    "open": HandTemplate("open", _four((44, 50, 48, 40), spread=8.0) + (THUMB,)),
    "flat": HandTemplate("flat", _four((44, 50, 48, 40), spread=0.0)),
    "l": HandTemplate("l", _four((0, 52, 0, 0)) + (Finger((-18.0, -4.0), 85.0, 30.0, 5.5),)),
    "horns": HandTemplate("horns", _four((44, 0, 0, 38), spread=12.0)),
    "three": HandTemplate("three", _four((0, 50, 48, 42), spread=10.0)),
}

DEFAULT_CLASSES = ("fist", "index", "v", "open")

GLOVE_RGB = np.array([0.55, 1.0, 0.15])   # fluorescent yellow-green


def _capsule_distance(px, py, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    t = ((px - ax) * dx + (py - ay) * dy) / max(dx * dx + dy * dy, 1e-12)
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


def hand_membership(template, x, y, jitter=None):
    """Boolean membership of hand-frame points ``(x, y)`` in the template."""
    jitter = jitter if jitter is not None else np.ones(len(template.fingers))
    ax, ay = template.palm
    inside = (x / ax) ** 2 + (y / ay) ** 2 <= 1.0
    for finger, j in zip(template.fingers, jitter):
        f = Finger(finger.base, finger.angle, finger.length * j, finger.radius)
        inside |= _capsule_distance(x, y, f.base, f.tip()) <= f.radius
    return inside


def render_mask(template, size=160, angle=0.0, scale=1.0, center=None, jitter=None):
    """Rasterize ``template`` rotated counterclockwise by ``angle`` degrees.

    One hand unit maps to ``scale`` pixels.
    """
    if center is None:
        center = ((size - 1) / 2.0, (size - 1) / 2.0)
    rows, cols = np.mgrid[0:size, 0:size].astype(float)
    # screen frame: x right, y up, relative to the center
    sx = (cols - center[1]) / scale
    sy = (center[0] - rows) / scale
    a = np.radians(angle)
    c, s = np.cos(a), np.sin(a)
    # inverse rotation back into the hand frame; the hand center sits at y=+24
    hx = c * sx + s * sy
    hy = -s * sx + c * sy + 24.0
    return hand_membership(template, hx, hy, jitter)


def shading(mask, angle=0.0, strength=0.35):
    """Smooth intensity ramp across the hand, in [1 - strength, 1]."""
    size_r, size_c = mask.shape
    rows, cols = np.mgrid[0:size_r, 0:size_c].astype(float)
    a = np.radians(angle + 30.0)
    ramp = (np.cos(a) * cols - np.sin(a) * rows) / max(size_r, size_c)
    ramp = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-12)
    return (1.0 - strength * ramp) * mask


def render_rgb(template, size=160, angle=0.0, scale=1.0, background="white", jitter=None,
               center=None, glove_rgb=GLOVE_RGB):
    """Color image of a gloved hand on a white or black background."""
    mask = render_mask(template, size, angle, scale, center, jitter)
    shade = shading(mask, angle)
    rgb = shade[..., None] * np.asarray(glove_rgb)[None, None, :]
    if background == "white":
        rgb = np.where(mask[..., None], rgb, 1.0)
    elif background != "black":
        raise ValueError(f"background must be 'white' or 'black', got {background!r}")
    return rgb


def to_uint8(rgb):
    return np.round(np.clip(rgb, 0.0, 1.0) * 255).astype(np.uint8)


def make_corpus(out_dir, classes=DEFAULT_CLASSES, n_subjects=5, n_repetitions=2, seed=0,
                size=160, background="white", manifest_name="manifest.csv"):
    """Write a small PNG corpus plus manifest; returns the Dataset.

    Each (subject, repetition) draws a random rotation, scale and finger
    length jitter. Subjects also get a persistent scale bias.
    """
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    subject_scale = rng.uniform(0.85, 1.1, size=n_subjects)
    records = []
    for class_id, name in enumerate(classes):
        template = TEMPLATES[name]
        for subject in range(n_subjects):
            for rep in range(n_repetitions):
                angle = rng.uniform(-180.0, 180.0)
                scale = subject_scale[subject] * rng.uniform(0.9, 1.05)
                jitter = rng.uniform(0.9, 1.1, size=len(template.fingers))
                rgb = render_rgb(template, size, angle, scale, background, jitter)
                path = out_dir / f"{class_id + 1}_{subject + 1}_{rep + 1}.png"
                Image.fromarray(to_uint8(rgb)).save(path)
                records.append(SampleRecord(path, class_id, subject, rep))
    dataset = Dataset(records, list(classes))
    write_manifest(dataset, out_dir / manifest_name)
    return dataset
