"""Instance assembly and panoptic matching."""
import numpy as np
import pytest

from foodfuse.assembly import (
    AssemblyParams,
    assemble_instances,
    assemble_panoptic,
    box_iou,
    candidate_filter_by_point,
    match_background_masks,
)
from foodfuse.core import (
    CategoryTable,
    DetectionBox,
    DetectionSet,
    InstanceMap,
    MaskRecord,
    MaskSet,
    tight_bbox,
)
from foodfuse.errors import SchemaError

CATS = CategoryTable(
    entries=((0, "background"), (3, "rice"), (7, "egg"), (10, "plate"), (11, "table")),
    food_ids=frozenset({3, 7}),
    nonfood_ids=frozenset({10, 11}),
)


def _rect(h, w, r0, r1, c0, c1, mask_id=0, point=None):
    grid = np.zeros((h, w), dtype=bool)
    grid[r0:r1, c0:c1] = True
    return MaskRecord.from_pixels(mask_id=mask_id, pixels=grid, point_input=point)


# ---------------------------------------------------------------------------
# box IoU


def test_box_iou_identical():
    assert box_iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0


def test_box_iou_hand_value():
    assert box_iou((0, 0, 10, 10), (5, 5, 15, 15)) == pytest.approx(25 / 175, abs=1e-12)


def test_box_iou_disjoint():
    assert box_iou((0, 0, 4, 4), (5, 5, 9, 9)) == 0.0


# ---------------------------------------------------------------------------
# instance assembly


def test_two_disjoint_masks_ordered_by_area():
    a = _rect(32, 32, 0, 10, 0, 10, mask_id=0)  # 100 px
    b = _rect(32, 32, 20, 32, 20, 28, mask_id=1)  # 96 px
    imap = assemble_instances([(a, 3), (b, 7)], (32, 32), CATS)
    assert [(s.segment_id, s.category_id, s.area) for s in imap.segments] == [
        (1, 3, 100),
        (2, 7, 96),
    ]
    assert imap.id_grid[5, 5] == 1
    assert imap.id_grid[25, 25] == 2


def test_background_votes_are_excluded():
    a = _rect(16, 16, 0, 8, 0, 8, mask_id=0)
    imap = assemble_instances([(a, 0)], (16, 16), CATS)
    assert imap.segments == ()
    assert not imap.id_grid.any()


def test_small_mask_merges_into_nearby_same_category():
    big = _rect(32, 32, 0, 10, 0, 10, mask_id=0)  # 100 px, centroid (4.5, 4.5)
    tiny = _rect(32, 32, 11, 12, 11, 13, mask_id=1)  # 2 px, centroid dist ~9.6
    params = AssemblyParams(merge_distance=0.25)  # 0.25 * diag(45.3) ~ 11.3 px
    imap = assemble_instances([(big, 3), (tiny, 3)], (32, 32), CATS, params)
    assert len(imap.segments) == 1
    assert imap.segments[0].area == 102
    assert imap.id_grid[11, 11] == imap.id_grid[5, 5]


def test_small_mask_different_category_not_merged():
    big = _rect(32, 32, 0, 10, 0, 10, mask_id=0)
    tiny = _rect(32, 32, 11, 12, 11, 13, mask_id=1)
    params = AssemblyParams(merge_distance=0.25)
    imap = assemble_instances([(big, 3), (tiny, 7)], (32, 32), CATS, params)
    # no label-7 host in range, so the tiny fragment is dropped
    assert len(imap.segments) == 1
    assert imap.segments[0].category_id == 3
    assert imap.id_grid[11, 11] == 0


def test_small_isolated_mask_dropped():
    big = _rect(64, 64, 0, 10, 0, 10, mask_id=0)
    tiny = _rect(64, 64, 60, 61, 60, 62, mask_id=1)  # far corner
    imap = assemble_instances([(big, 3), (tiny, 3)], (64, 64), CATS)
    assert len(imap.segments) == 1
    assert imap.id_grid[60, 60] == 0


def test_small_mask_prefers_nearest_host():
    near = _rect(64, 64, 10, 20, 10, 20, mask_id=0)  # centroid (14.5, 14.5)
    far = _rect(64, 64, 40, 50, 40, 50, mask_id=1)
    tiny = _rect(64, 64, 21, 22, 14, 16, mask_id=2)  # beside `near`
    imap = assemble_instances([(near, 3), (far, 3), (tiny, 3)], (64, 64), CATS)
    areas = {s.segment_id: s.area for s in imap.segments}
    assert sorted(areas.values()) == [100, 102]
    assert imap.id_grid[21, 14] == imap.id_grid[15, 15]


def test_overlap_small_mask_survives():
    big = _rect(32, 32, 0, 16, 0, 16, mask_id=0)  # 256 px
    small = _rect(32, 32, 4, 12, 4, 12, mask_id=1)  # 64 px inside big
    imap = assemble_instances([(big, 3), (small, 7)], (32, 32), CATS)
    # small painted last, so it survives the overlap
    assert imap.id_grid[8, 8] != imap.id_grid[0, 0]
    by_id = {s.segment_id: s for s in imap.segments}
    small_id = int(imap.id_grid[8, 8])
    assert by_id[small_id].category_id == 7
    assert by_id[small_id].area == 64
    big_id = int(imap.id_grid[0, 0])
    assert by_id[big_id].area == 256 - 64


def test_segment_table_matches_grid_counts():
    rng = np.random.default_rng(4)
    labeled = []
    for i in range(6):
        grid = rng.random((24, 24)) < 0.2
        if not grid.any():
            grid[i, i] = True
        labeled.append((MaskRecord.from_pixels(mask_id=i, pixels=grid), 3 if i % 2 else 7))
    imap = assemble_instances(labeled, (24, 24), CATS)
    assert len(imap.segments) > 0
    for seg in imap.segments:
        region = imap.id_grid == seg.segment_id
        assert seg.area == int(region.sum())
        assert seg.bbox == tight_bbox(region)


def test_empty_input_gives_empty_map():
    imap = assemble_instances([], (8, 8), CATS)
    assert isinstance(imap, InstanceMap)
    assert imap.segments == ()


# ---------------------------------------------------------------------------
# point containment candidates


def _boxes(*xyxys, categories=None, labels=None, size=(32, 32)):
    categories = categories or [10] * len(xyxys)
    labels = labels or [f"b{i}" for i in range(len(xyxys))]
    return DetectionSet(
        width=size[0],
        height=size[1],
        boxes=tuple(
            DetectionBox(xyxy=tuple(map(float, xy)), score=0.9, category_id=c, label=l)
            for xy, c, l in zip(xyxys, categories, labels)
        ),
    )


def test_candidate_filter_contains_point():
    masks = MaskSet(width=16, height=16, records=(_rect(16, 16, 2, 4, 2, 4, mask_id=0, point=(3.0, 3.0)),))
    cands = candidate_filter_by_point(masks, _boxes((0, 0, 10, 10)))
    assert cands == {0: [0]}


def test_candidate_filter_edge_point_excluded():
    masks = MaskSet(width=16, height=16, records=(_rect(16, 16, 2, 4, 8, 12, mask_id=0, point=(10.0, 3.0)),))
    cands = candidate_filter_by_point(masks, _boxes((0, 0, 10, 10)))
    assert cands == {0: []}


def test_candidate_filter_no_boxes():
    masks = MaskSet(width=16, height=16, records=(_rect(16, 16, 2, 4, 2, 4, mask_id=0),))
    cands = candidate_filter_by_point(masks, _boxes())
    assert cands == {0: []}


# ---------------------------------------------------------------------------
# background matching


def test_match_exact_box_gets_category():
    mask = _rect(32, 32, 4, 12, 4, 12, mask_id=0, point=(8.0, 8.0))
    boxes = _boxes((4, 4, 12, 12), categories=[10])
    assert match_background_masks([mask], boxes) == [(0, 10)]


def test_match_below_threshold_keeps_background():
    mask = _rect(32, 32, 0, 4, 0, 4, mask_id=0, point=(1.0, 1.0))
    boxes = _boxes((0, 0, 20, 20), categories=[10])  # IoU 16/400 = 0.04
    assert match_background_masks([mask], boxes) == [(0, None)]


def test_match_argmax_over_candidates():
    mask = _rect(32, 32, 0, 10, 0, 10, mask_id=0, point=(5.0, 5.0))
    # IoU(a)=100/144≈0.69, IoU(b)=100/100=1.0
    boxes = _boxes((0, 0, 12, 12), (0, 0, 10, 10), categories=[10, 11])
    assert match_background_masks([mask], boxes) == [(0, 11)]


def test_match_requires_point_containment():
    mask = _rect(32, 32, 0, 10, 0, 10, mask_id=0, point=(20.0, 20.0))
    boxes = _boxes((0, 0, 10, 10), categories=[10])  # perfect IoU but point outside
    assert match_background_masks([mask], boxes) == [(0, None)]


def test_match_threshold_is_strict():
    mask = _rect(32, 32, 0, 8, 0, 8, mask_id=0, point=(4.0, 4.0))
    boxes = _boxes((0, 0, 8, 16), categories=[10])  # IoU = 64/128 = 0.5 exactly
    params = AssemblyParams(panoptic_iou_thresh=0.5)
    assert match_background_masks([mask], boxes, params) == [(0, None)]


def test_match_pixel_iou_mode_differs_for_sparse_mask():
    grid = np.zeros((16, 16), dtype=bool)
    grid[0:8:2, 0:8] = True  # half the bbox rows, area 32, tight bbox (0,0,8,7)
    mask = MaskRecord.from_pixels(mask_id=0, pixels=grid, point_input=(0.0, 0.0))
    boxes = _boxes((0, 0, 8, 8), categories=[10])
    bbox_based = match_background_masks([mask], boxes, AssemblyParams(pixel_iou=False))
    pixel_based = match_background_masks([mask], boxes, AssemblyParams(pixel_iou=True))
    # tight-bbox IoU = 56/64 > 0.5, pixel IoU = 32/(32+64-32) = 0.5 not > 0.5
    assert bbox_based == [(0, 10)]
    assert pixel_based == [(0, None)]


# ---------------------------------------------------------------------------
# panoptic


def _demo_instances():
    a = _rect(32, 32, 0, 8, 0, 8, mask_id=0)
    b = _rect(32, 32, 10, 16, 10, 16, mask_id=1)
    return assemble_instances([(a, 3), (b, 7)], (32, 32), CATS)


def test_panoptic_no_nonfood_equals_instances():
    instances = _demo_instances()
    pmap = assemble_panoptic(instances, [], CATS)
    assert np.array_equal(pmap.id_grid, instances.id_grid)
    assert pmap.segments == instances.segments
    assert all(s.is_food for s in pmap.segments)


def test_panoptic_rejects_food_category_for_nonfood_mask():
    instances = _demo_instances()
    plate = _rect(32, 32, 0, 32, 0, 32, mask_id=9)
    with pytest.raises(SchemaError):
        assemble_panoptic(instances, [(plate, 3)], CATS)


def test_panoptic_food_precedence_and_id_continuation():
    instances = _demo_instances()
    plate = _rect(32, 32, 0, 20, 0, 20, mask_id=9)
    pmap = assemble_panoptic(instances, [(plate, 10)], CATS)
    food_ids = {s.segment_id for s in pmap.segments if s.is_food}
    nonfood = [s for s in pmap.segments if not s.is_food]
    assert food_ids == {1, 2}
    assert [s.segment_id for s in nonfood] == [3]
    # no food pixel was reassigned
    inst = np.asarray(instances.id_grid)
    assert np.array_equal(pmap.id_grid[inst != 0], inst[inst != 0])
    # plate area excludes the food overlap
    assert nonfood[0].area == 400 - int((inst[0:20, 0:20] != 0).sum())


def test_panoptic_merges_same_category_nonfood_masks_when_close():
    instances = assemble_instances([], (64, 64), CATS)
    left = _rect(64, 64, 20, 30, 10, 20, mask_id=0)  # 100 px
    crumb = _rect(64, 64, 20, 30, 21, 22, mask_id=1)  # 10 px, nearby, same category
    pmap = assemble_panoptic(instances, [(left, 11), (crumb, 11)], CATS)
    assert len(pmap.segments) == 1
    assert pmap.segments[0].area == 110
