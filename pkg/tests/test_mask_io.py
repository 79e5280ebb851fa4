"""Disk formats: PNG label maps, mask directories, RLE, detections, segment maps."""
import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from foodfuse.core import CategoryTable, InstanceMap, LabelMap, MaskRecord, MaskSet, Segment
from foodfuse.errors import (
    CsvSchemaError,
    DimMismatchError,
    FormatError,
    LengthMismatchError,
    MissingMaskFileError,
    SchemaError,
)
from foodfuse.mask_io import (
    colorize_segments,
    encode_label_png,
    load_detections,
    load_instance_map,
    load_label_map,
    load_mask_set,
    rle_decode,
    rle_encode,
    save_instance_map,
    save_label_map,
    save_mask_set,
    segment_color,
)


# ---------------------------------------------------------------------------
# label maps


def test_label_map_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    data = rng.integers(0, 20, size=(16, 16), dtype=np.uint8)
    path = tmp_path / "m.png"
    save_label_map(LabelMap(data), path)
    again = load_label_map(path)
    assert np.array_equal(again.data, data)


def test_label_map_pixel_values_are_category_ids(tmp_path):
    data = np.array([[0, 0], [5, 5]], dtype=np.uint8)
    path = tmp_path / "m.png"
    Image.fromarray(data, mode="L").save(path)
    lm = load_label_map(path)
    assert lm.data.tolist() == [[0, 0], [5, 5]]


def test_label_map_rejects_rgb(tmp_path):
    path = tmp_path / "rgb.png"
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8), mode="RGB").save(path)
    with pytest.raises(FormatError):
        load_label_map(path)


def test_encode_label_png_matches_file_bytes(tmp_path):
    data = np.arange(64, dtype=np.uint8).reshape(8, 8)
    lm = LabelMap(data)
    path = tmp_path / "m.png"
    save_label_map(lm, path)
    assert encode_label_png(lm) == path.read_bytes()


# ---------------------------------------------------------------------------
# RLE


def test_rle_all_false():
    assert rle_encode(np.zeros((2, 2), dtype=bool)) == [4]


def test_rle_all_true():
    assert rle_encode(np.ones((2, 2), dtype=bool)) == [0, 4]


def test_rle_is_column_major():
    # column 0 = [True, False], column 1 = [False, True]
    grid = np.array([[True, False], [False, True]])
    assert rle_encode(grid) == [0, 1, 2, 1]


def test_rle_decode_known_vector():
    grid = rle_decode([0, 1, 2, 1], (2, 2))
    assert grid.tolist() == [[True, False], [False, True]]


def test_rle_decode_length_mismatch():
    with pytest.raises(LengthMismatchError):
        rle_decode([3], (2, 2))


@settings(max_examples=300, deadline=None)
@given(st.binary(min_size=64, max_size=64))
def test_rle_round_trip_random_8x8(blob):
    grid = np.frombuffer(blob, dtype=np.uint8).reshape(8, 8) > 127
    counts = rle_encode(grid)
    assert all(c >= 0 for c in counts)
    assert sum(counts) == 64
    assert np.array_equal(rle_decode(counts, (8, 8)), grid)


def test_rle_round_trip_non_square():
    rng = np.random.default_rng(11)
    for _ in range(100):
        h, w = rng.integers(1, 12, size=2)
        grid = rng.random((h, w)) < 0.4
        assert np.array_equal(rle_decode(rle_encode(grid), (int(w), int(h))), grid)


# ---------------------------------------------------------------------------
# mask directories


def _write_mask_dir(tmp_path, masks):
    ms = MaskSet(
        width=masks[0].pixels.shape[1],
        height=masks[0].pixels.shape[0],
        records=tuple(masks),
    )
    save_mask_set(ms, tmp_path / "sam")
    return tmp_path / "sam"


def test_mask_set_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    masks = []
    for i in range(4):
        grid = rng.random((10, 12)) < 0.3
        if not grid.any():
            grid[0, 0] = True
        masks.append(MaskRecord.from_pixels(mask_id=i, pixels=grid, predicted_iou=0.9 - i * 0.1))
    directory = _write_mask_dir(tmp_path, masks)
    loaded = load_mask_set(directory)
    assert len(loaded) == 4
    for orig, got in zip(masks, loaded.records):
        assert got.mask_id == orig.mask_id
        assert np.array_equal(got.pixels, orig.pixels)
        assert got.area == orig.area
        assert got.bbox == orig.bbox
        assert got.predicted_iou == pytest.approx(orig.predicted_iou)


def test_mask_set_empty_csv(tmp_path):
    directory = tmp_path / "sam"
    directory.mkdir()
    header = "id,area,bbox_x0,bbox_y0,bbox_w,bbox_h,point_input_x,point_input_y,predicted_iou,stability_score,crop_box_x0,crop_box_y0,crop_box_w,crop_box_h"
    (directory / "metadata.csv").write_text(header + "\n")
    loaded = load_mask_set(directory, image_size=(8, 8))
    assert len(loaded) == 0
    assert loaded.width == 8


def test_mask_set_missing_png(tmp_path):
    grid = np.ones((4, 4), dtype=bool)
    directory = _write_mask_dir(tmp_path, [MaskRecord.from_pixels(mask_id=0, pixels=grid)])
    (directory / "0.png").unlink()
    with pytest.raises(MissingMaskFileError):
        load_mask_set(directory)


def test_mask_set_bad_header(tmp_path):
    directory = tmp_path / "sam"
    directory.mkdir()
    (directory / "metadata.csv").write_text("id,area\n")
    with pytest.raises(CsvSchemaError):
        load_mask_set(directory)


def test_mask_set_csv_disagreement_recomputes_with_warning(tmp_path, caplog):
    grid = np.zeros((6, 6), dtype=bool)
    grid[1:4, 1:4] = True  # area 9
    directory = _write_mask_dir(tmp_path, [MaskRecord.from_pixels(mask_id=0, pixels=grid)])
    csv_path = directory / "metadata.csv"
    lines = csv_path.read_text().splitlines()
    cells = lines[1].split(",")
    cells[1] = "8"  # off-by-one area
    csv_path.write_text(lines[0] + "\n" + ",".join(cells) + "\n")

    with caplog.at_level(logging.WARNING, logger="foodfuse.mask_io"):
        loaded = load_mask_set(directory)
    assert loaded.records[0].area == 9
    assert any("area" in rec.message for rec in caplog.records)

    trusted = load_mask_set(directory, trust_metadata=True)
    assert trusted.records[0].area == 8


def test_mask_set_dim_mismatch_against_expected_size(tmp_path):
    grid = np.ones((4, 4), dtype=bool)
    directory = _write_mask_dir(tmp_path, [MaskRecord.from_pixels(mask_id=0, pixels=grid)])
    with pytest.raises(DimMismatchError):
        load_mask_set(directory, image_size=(9, 9))


# ---------------------------------------------------------------------------
# detections


def _detections_json(tmp_path, boxes):
    path = tmp_path / "det.json"
    path.write_text(json.dumps({"boxes": boxes}))
    return path


def test_load_detections_empty(tmp_path):
    path = _detections_json(tmp_path, [])
    det = load_detections(path, (32, 32))
    assert len(det) == 0


def test_load_detections_clamps_to_image(tmp_path):
    path = _detections_json(
        tmp_path,
        [{"xyxy": [20.0, 5.0, 50.0, 12.0], "score": 0.8, "category_id": 3, "label": "plate"}],
    )
    det = load_detections(path, (32, 32))
    assert det.boxes[0].xyxy == (20.0, 5.0, 32.0, 12.0)


def test_load_detections_drops_empty_after_clamp(tmp_path, caplog):
    path = _detections_json(
        tmp_path,
        [
            {"xyxy": [40.0, 5.0, 50.0, 12.0], "score": 0.8, "category_id": 3, "label": "gone"},
            {"xyxy": [0.0, 0.0, 8.0, 8.0], "score": 0.9, "category_id": 4, "label": "kept"},
        ],
    )
    with caplog.at_level(logging.WARNING, logger="foodfuse.mask_io"):
        det = load_detections(path, (32, 32))
    assert [b.label for b in det.boxes] == ["kept"]
    assert any("clamp" in rec.message or "dropp" in rec.message for rec in caplog.records)


def test_load_detections_preserves_order(tmp_path):
    path = _detections_json(
        tmp_path,
        [
            {"xyxy": [0.0, 0.0, 4.0, 4.0], "score": 0.2, "category_id": 1, "label": "a"},
            {"xyxy": [1.0, 1.0, 5.0, 5.0], "score": 0.9, "category_id": 2, "label": "b"},
        ],
    )
    det = load_detections(path, (32, 32))
    assert [b.label for b in det.boxes] == ["a", "b"]


def test_load_detections_schema_error(tmp_path):
    path = tmp_path / "det.json"
    path.write_text(json.dumps({"not_boxes": []}))
    with pytest.raises(SchemaError):
        load_detections(path, (32, 32))


# ---------------------------------------------------------------------------
# segment maps and colors


def _tiny_instance_map():
    grid = np.zeros((8, 8), dtype=np.int32)
    grid[0:4, 0:4] = 1
    grid[5:8, 5:8] = 2
    segments = (
        Segment(segment_id=1, category_id=2, area=16, bbox=(0, 0, 4, 4), is_food=True),
        Segment(segment_id=2, category_id=1, area=9, bbox=(5, 5, 3, 3), is_food=True),
    )
    return InstanceMap(id_grid=grid, segments=segments)


def _tiny_categories():
    return CategoryTable(
        entries=((0, "background"), (1, "rice"), (2, "egg")),
        food_ids=frozenset({1, 2}),
    )


def test_segment_map_round_trip(tmp_path):
    imap = _tiny_instance_map()
    cats = _tiny_categories()
    save_instance_map(imap, tmp_path, cats)
    again = load_instance_map(tmp_path)
    assert np.array_equal(again.id_grid, imap.id_grid)
    assert again.segments == imap.segments


def test_segment_map_id_grid_is_16_bit(tmp_path):
    save_instance_map(_tiny_instance_map(), tmp_path, _tiny_categories())
    with Image.open(tmp_path / "instance.png") as im:
        assert im.mode in ("I;16", "I")


def test_segment_map_json_has_names(tmp_path):
    save_instance_map(_tiny_instance_map(), tmp_path, _tiny_categories())
    table = json.loads((tmp_path / "instance_segments.json").read_text())
    names = {s["segment_id"]: s["category_name"] for s in table["segments"]}
    assert names == {1: "egg", 2: "rice"}


def test_segment_map_save_is_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    save_instance_map(_tiny_instance_map(), a, _tiny_categories())
    save_instance_map(_tiny_instance_map(), b, _tiny_categories())
    for name in ("instance.png", "instance_segments.json", "instance_color.png"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_empty_segment_map_round_trip(tmp_path):
    empty = InstanceMap(id_grid=np.zeros((4, 4), dtype=np.int32), segments=())
    save_instance_map(empty, tmp_path, _tiny_categories())
    again = load_instance_map(tmp_path)
    assert again.segments == ()
    assert not again.id_grid.any()


def test_segment_color_is_stable_and_zero_is_black():
    assert segment_color(0) == (0, 0, 0)
    assert segment_color(7) == segment_color(7)
    assert segment_color(1) != segment_color(2)


def test_colorize_segments_applies_palette():
    grid = np.array([[0, 1], [2, 1]], dtype=np.int32)
    rgb = colorize_segments(grid)
    assert rgb.shape == (2, 2, 3)
    assert tuple(rgb[0, 0]) == (0, 0, 0)
    assert tuple(rgb[0, 1]) == segment_color(1)
    assert tuple(rgb[1, 0]) == segment_color(2)
