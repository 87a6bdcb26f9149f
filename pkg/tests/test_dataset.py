import colorsys

import numpy as np
import pytest
from PIL import Image

from handshape.dataset import (
    GloveFilterConfig, SegmentedImage, default_glove_config, load_manifest,
    load_rgb, manifest_from_directory, segment_glove, segment_image, to_grayscale,
    write_manifest,
)
from handshape.errors import ParseError, SegmentationEmpty, ValidationError

GREEN = (0.3, 0.9, 0.2)
RED = (0.9, 0.1, 0.1)


def _write(path, rows, header="path,class,subject,repetition"):
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    return path


def _oracle(rgb, cfg):
    out = np.zeros(rgb.shape[:2], dtype=bool)
    lo, hi = cfg.hue_range
    for i in range(rgb.shape[0]):
        for j in range(rgb.shape[1]):
            h, s, v = colorsys.rgb_to_hsv(*rgb[i, j])
            h *= 360.0
            in_hue = lo <= h <= hi if lo <= hi else (h >= lo or h <= hi)
            out[i, j] = in_hue and s >= cfg.min_saturation and v >= cfg.min_value
    return out


def test_manifest_800_rows(tmp_path):
    rows = [f"img_{c}_{s}_{r}.png,{c},{s},{r}"
            for c in range(16) for s in range(10) for r in range(5)]
    ds = load_manifest(_write(tmp_path / "m.csv", rows), check_files=False)
    assert len(ds) == 800
    assert ds.records[0].image_path == tmp_path / "img_0_0_0.png"
    assert np.bincount(ds.labels).tolist() == [50] * 16


def test_manifest_header_only(tmp_path):
    assert len(load_manifest(_write(tmp_path / "m.csv", []))) == 0


def test_manifest_class_out_of_range_names_row(tmp_path):
    p = _write(tmp_path / "m.csv", ["a.png,0,0,0", "b.png,16,0,0"])
    with pytest.raises(ValidationError, match="row 3"):
        load_manifest(p, check_files=False)


@pytest.mark.parametrize("row", ["a.png,x,0,0", "a.png,1,2"])
def test_manifest_malformed_row(tmp_path, row):
    p = _write(tmp_path / "m.csv", ["ok.png,0,0,0", row])
    with pytest.raises(ParseError) as err:
        load_manifest(p, check_files=False)
    assert err.value.row == 3


def test_manifest_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path / "missing.csv")
    with pytest.raises(ParseError):
        load_manifest(_write(tmp_path / "h.csv", [], header="file,label"))
    with pytest.raises(ValidationError, match="duplicate"):
        load_manifest(_write(tmp_path / "d.csv", ["a.png,0,0,0", "b.png,0,0,0"]),
                      check_files=False)
    with pytest.raises(ValidationError, match="not found"):
        load_manifest(_write(tmp_path / "f.csv", ["a.png,0,0,0"]))


def test_manifest_deterministic_and_round_trip(tmp_path):
    rows = [f"x{i}.png,{i % 3},{i % 10},{i // 10}" for i in range(30)]
    p = _write(tmp_path / "m.csv", rows)
    a = load_manifest(p, check_files=False)
    assert a == load_manifest(p, check_files=False)
    write_manifest(a, tmp_path / "again.csv")
    assert load_manifest(tmp_path / "again.csv", check_files=False) == a


def test_manifest_from_directory(tmp_path):
    for name in ("1_1_1.png", "16_10_5.png", "notes.txt"):
        (tmp_path / name).write_bytes(b"")
    ds = manifest_from_directory(tmp_path)
    assert [(r.class_id, r.subject_id, r.repetition) for r in ds] == [(0, 0, 0), (15, 9, 4)]


def test_uniform_in_window():
    rgb = np.broadcast_to(GREEN, (6, 7, 3))
    seg = segment_glove(rgb)
    assert seg.mask.all()
    assert np.allclose(seg.pixels, to_grayscale(rgb))


def test_uniform_outside_window():
    with pytest.raises(SegmentationEmpty):
        segment_glove(np.broadcast_to(RED, (6, 7, 3)))


def test_half_image_matches_oracle():
    rgb = np.empty((8, 10, 3))
    rgb[:, :5] = GREEN
    rgb[:, 5:] = RED
    seg = segment_glove(rgb)
    expected = np.zeros((8, 10), dtype=bool)
    expected[:, :5] = True
    assert np.array_equal(seg.mask, expected)
    assert np.array_equal(seg.mask, _oracle(rgb, default_glove_config()))
    assert np.all(seg.pixels[:, 5:] == 0)


@pytest.mark.parametrize("hue_range", [(40.0, 160.0), (300.0, 30.0)])
def test_random_pixels_match_oracle(rng, hue_range):
    cfg = GloveFilterConfig(hue_range=hue_range, min_saturation=0.3, min_value=0.2)
    rgb = rng.random((12, 12, 3))
    rgb[0, 0] = GREEN if hue_range[0] < hue_range[1] else RED
    mask = segment_glove(rgb, cfg).mask
    assert np.array_equal(mask, _oracle(rgb, cfg))


def test_idempotent(rng):
    rgb = rng.random((16, 16, 3))
    rgb[4:10, 4:10] = GREEN
    first = segment_glove(rgb)
    second = segment_glove(first.rgb)
    assert np.array_equal(first.mask, second.mask)
    assert np.array_equal(first.pixels, second.pixels)


def test_segment_image_modes():
    rgb = np.zeros((10, 10, 3))
    rgb[3:6, 3:6] = 0.5
    seg = segment_image(rgb)                       # black background -> no color filter
    assert seg.mask.sum() == 9
    with pytest.raises(SegmentationEmpty):
        segment_image(rgb, mode="glove")
    with pytest.raises(ValidationError):
        segment_image(rgb, mode="magic")


def test_glove_config_validation():
    with pytest.raises(ValidationError):
        GloveFilterConfig(hue_range=(0, 400), min_saturation=0.1, min_value=0.1)
    cfg = default_glove_config()
    assert GloveFilterConfig.from_dict(cfg.to_dict()) == cfg


def test_load_rgb_bit_exact(tmp_path, rng):
    arr = rng.integers(0, 256, size=(5, 6, 3), dtype=np.uint8)
    Image.fromarray(arr).save(tmp_path / "x.png")
    assert np.array_equal(np.round(load_rgb(tmp_path / "x.png") * 255).astype(np.uint8), arr)


def test_segmented_image_shapes():
    with pytest.raises(ValueError):
        SegmentedImage(np.zeros((3, 3)), np.zeros((3, 4), dtype=bool))
