"""Core types: category table, bbox helpers, mask records, segment grids."""
import numpy as np
import pytest

from foodfuse.core import (
    CategoryTable,
    DetectionBox,
    LabelMap,
    MaskRecord,
    MaskSet,
    box_contains_point,
    load_categories,
    segments_from_grid,
    tight_bbox,
)
from foodfuse.errors import DimMismatchError, EmptyMaskError, SchemaError


# ---------------------------------------------------------------------------
# category table


def test_load_categories_parses_three_column_file(tmp_path):
    path = tmp_path / "cats.tsv"
    path.write_text("0\tbackground\tbackground\n1\trice\tfood\n10\tplate\tnonfood\n")
    table = load_categories(path)
    assert table.background_id == 0
    assert table.name(1) == "rice"
    assert table.is_food(1)
    assert not table.is_food(10)
    assert 10 in table.nonfood_ids


def test_load_categories_defaults_unflagged_ids_to_food(tmp_path):
    path = tmp_path / "cats.tsv"
    path.write_text("0\tbackground\n1\trice\n2\tegg\n")
    table = load_categories(path)
    assert table.food_ids == frozenset({1, 2})
    assert table.nonfood_ids == frozenset()


def test_load_categories_rejects_duplicate_ids(tmp_path):
    path = tmp_path / "cats.tsv"
    path.write_text("0\tbackground\n1\trice\n1\tegg\n")
    with pytest.raises(SchemaError):
        load_categories(path)


def test_semantic_class_count_covers_background_and_food(tmp_path):
    path = tmp_path / "cats.tsv"
    path.write_text("0\tbackground\tbackground\n3\tsoup\tfood\n10\tplate\tnonfood\n")
    table = load_categories(path)
    # nonfood ids never appear in semantic maps, so they do not widen the range
    assert table.semantic_class_count == 4


def test_category_name_unknown_id_raises():
    table = CategoryTable(entries=((0, "background"), (1, "rice")), food_ids=frozenset({1}))
    with pytest.raises(KeyError):
        table.name(9)


# ---------------------------------------------------------------------------
# tight_bbox / containment


def test_tight_bbox_single_pixel():
    grid = np.zeros((8, 8), dtype=bool)
    grid[5, 3] = True  # row y=5, col x=3
    assert tight_bbox(grid) == (3, 5, 1, 1)


def test_tight_bbox_full_grid():
    assert tight_bbox(np.ones((4, 4), dtype=bool)) == (0, 0, 4, 4)


def test_tight_bbox_two_pixels():
    grid = np.zeros((6, 6), dtype=bool)
    grid[1, 1] = True
    grid[3, 2] = True
    assert tight_bbox(grid) == (1, 1, 2, 3)


def test_tight_bbox_empty_raises():
    with pytest.raises(EmptyMaskError):
        tight_bbox(np.zeros((4, 4), dtype=bool))


def test_box_contains_point_is_half_open():
    box = (0.0, 0.0, 10.0, 10.0)
    assert box_contains_point(box, (3, 3))
    assert box_contains_point(box, (0, 0))
    assert not box_contains_point(box, (10, 3))
    assert not box_contains_point(box, (3, 10))


# ---------------------------------------------------------------------------
# records and maps


def _record(pixels, mask_id=0, **kw):
    return MaskRecord.from_pixels(mask_id=mask_id, pixels=pixels, **kw)


def test_mask_record_from_pixels_recomputes_area_and_bbox():
    grid = np.zeros((10, 10), dtype=bool)
    grid[2:5, 4:8] = True
    rec = _record(grid)
    assert rec.area == 12
    assert rec.bbox == (4, 2, 4, 3)
    assert rec.bbox_xyxy == (4, 2, 8, 5)


def test_mask_record_round_trip_area_bbox_property():
    rng = np.random.default_rng(7)
    for _ in range(50):
        grid = rng.random((12, 9)) < 0.3
        if not grid.any():
            grid[0, 0] = True
        rec = _record(grid)
        assert rec.area == int(grid.sum())
        assert rec.bbox == tight_bbox(grid)


def test_mask_record_rejects_empty_mask():
    with pytest.raises(EmptyMaskError):
        _record(np.zeros((4, 4), dtype=bool))


def test_mask_record_pixels_are_read_only():
    grid = np.ones((3, 3), dtype=bool)
    rec = _record(grid)
    with pytest.raises(ValueError):
        rec.pixels[0, 0] = False


def test_mask_record_point_outside_image_rejected():
    grid = np.ones((4, 4), dtype=bool)
    with pytest.raises(SchemaError):
        MaskRecord.from_pixels(mask_id=0, pixels=grid, point_input=(9.0, 1.0))


def test_mask_set_rejects_duplicate_ids():
    grid = np.ones((4, 4), dtype=bool)
    a = _record(grid, mask_id=1)
    b = _record(grid, mask_id=1)
    with pytest.raises(SchemaError):
        MaskSet(width=4, height=4, records=(a, b))


def test_mask_set_rejects_dim_mismatch():
    a = _record(np.ones((4, 4), dtype=bool), mask_id=0)
    with pytest.raises(DimMismatchError):
        MaskSet(width=5, height=5, records=(a,))


def test_label_map_is_read_only():
    lm = LabelMap(np.zeros((4, 6), dtype=np.uint8))
    assert lm.size == (6, 4)
    with pytest.raises(ValueError):
        lm.data[0, 0] = 3


def test_detection_box_rejects_degenerate():
    with pytest.raises(SchemaError):
        DetectionBox(xyxy=(5.0, 5.0, 5.0, 9.0), score=0.5, category_id=1, label="x")


def test_segments_from_grid_matches_pixel_counts():
    grid = np.zeros((6, 6), dtype=np.int32)
    grid[0:2, 0:3] = 1
    grid[4:6, 4:6] = 2
    segs = segments_from_grid(grid, {1: 5, 2: 7}, {1: True, 2: False})
    by_id = {s.segment_id: s for s in segs}
    assert by_id[1].area == 6 and by_id[1].category_id == 5 and by_id[1].is_food
    assert by_id[2].area == 4 and not by_id[2].is_food
    assert by_id[1].bbox == (0, 0, 3, 2)
