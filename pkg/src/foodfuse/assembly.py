"""Assemble food instances from labeled masks and extend them to a panoptic map."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    BoxXyxy,
    CategoryTable,
    InstanceMap,
    MaskRecord,
    MaskSet,
    PanopticMap,
    box_contains_point,
    segments_from_grid,
)
from .errors import SchemaError

from .core import DetectionSet


@dataclass(frozen=True)
class AssemblyParams:
    """Knobs for small-mask merging and box-to-mask matching."""

    min_area_ratio: float = 0.005  # below this fraction of image area a mask is "small"
    merge_distance: float = 0.1  # max centroid distance, as a fraction of the image diagonal
    panoptic_iou_thresh: float = 0.5  # a box labels a background mask only above this IoU
    pixel_iou: bool = False  # match against the pixel mask instead of its tight bbox

    def __post_init__(self) -> None:
        for name in ("min_area_ratio", "merge_distance", "panoptic_iou_thresh"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SchemaError(f"{name} must be in [0, 1], got {value}")


def box_iou(a: BoxXyxy, b: BoxXyxy) -> float:
    """Intersection-over-union of two xyxy boxes; 0 when disjoint."""
    ix0 = max(a[0], b[0])
    iy0 = max(a[1], b[1])
    ix1 = min(a[2], b[2])
    iy1 = min(a[3], b[3])
    inter = max(0.0, ix1 - ix0) * max(0.0, iy1 - iy0)
    if inter == 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


@dataclass
class _Candidate:
    """One instance candidate during assembly; pixels grow as smalls merge in."""

    record: MaskRecord
    category_id: int
    pixels: np.ndarray
    centroid: tuple[float, float]

    @property
    def mask_id(self) -> int:
        return self.record.mask_id

    @property
    def area(self) -> int:
        return int(self.pixels.sum())


def _merge_small(
    labeled: Sequence[tuple[MaskRecord, int]],
    image_size: tuple[int, int],
    params: AssemblyParams,
) -> list[_Candidate]:
    """Apply the small-mask rules: absorb small masks into nearby same-category
    candidates, drop the isolated ones, and return the survivors.

    Absorbers are the candidates at or above the size threshold; the absorbing
    mask keeps its identity and its pixel set grows by union.
    """
    width, height = image_size
    area_floor = params.min_area_ratio * width * height
    max_dist = params.merge_distance * math.hypot(width, height)

    candidates = [
        _Candidate(
            record=r,
            category_id=label,
            pixels=np.array(r.pixels, copy=True),
            centroid=r.centroid(),
        )
        for r, label in labeled
    ]
    large = [c for c in candidates if c.record.area >= area_floor]
    small = [c for c in candidates if c.record.area < area_floor]
    for frag in sorted(small, key=lambda c: c.mask_id):
        best: _Candidate | None = None
        best_key: tuple[float, int] | None = None
        for host in large:
            if host.category_id != frag.category_id:
                continue
            dist = math.dist(host.centroid, frag.centroid)
            if dist >= max_dist:
                continue
            key = (dist, host.mask_id)
            if best_key is None or key < best_key:
                best, best_key = host, key
        if best is not None:
            best.pixels |= frag.pixels
        # isolated fragments are dropped
    return large


def _paint(
    candidates: list[_Candidate],
    shape: tuple[int, int],
    protect: np.ndarray | None = None,
) -> tuple[np.ndarray, dict[int, _Candidate]]:
    """Paint candidates largest-first (later, smaller ones win overlaps) and
    return the grid of provisional ids plus the id -> candidate mapping."""
    grid = np.zeros(shape, dtype=np.uint16)
    by_provisional: dict[int, _Candidate] = {}
    ordered = sorted(candidates, key=lambda c: (-c.area, c.mask_id))
    for provisional, cand in enumerate(ordered, start=1):
        target = cand.pixels if protect is None else (cand.pixels & ~protect)
        grid[target] = provisional
        by_provisional[provisional] = cand
    return grid, by_provisional


def _relabel_by_final_area(
    grid: np.ndarray,
    by_provisional: dict[int, _Candidate],
    first_id: int,
) -> tuple[np.ndarray, dict[int, int], dict[int, _Candidate]]:
    """Drop fully-overpainted candidates and assign final ids, largest first."""
    counts = np.bincount(grid.ravel(), minlength=max(by_provisional, default=0) + 1)
    survivors = [p for p in by_provisional if counts[p] > 0]
    survivors.sort(key=lambda p: (-counts[p], by_provisional[p].mask_id))
    mapping = {p: first_id + i for i, p in enumerate(survivors)}
    lut = np.zeros(len(by_provisional) + 1, dtype=np.uint16)
    for p, final in mapping.items():
        lut[p] = final
    return lut[grid], mapping, {mapping[p]: by_provisional[p] for p in survivors}


def assemble_instances(
    labeled: Sequence[tuple[MaskRecord, int]],
    image_size: tuple[int, int],
    categories: CategoryTable,
    params: AssemblyParams | None = None,
) -> InstanceMap:
    """Turn kept (mask, label) pairs into food instances with ids 1..T.

    Background-voted masks are excluded; small masks merge into the nearest
    same-category candidate within range or are dropped; ids are assigned in
    descending area with overlaps resolved large-first (small masks survive).
    """
    params = params or AssemblyParams()
    width, height = image_size
    food = [(r, label) for r, label in labeled if label != categories.background_id]
    candidates = _merge_small(food, image_size, params)
    grid, by_prov = _paint(candidates, (height, width))
    grid, _, by_final = _relabel_by_final_area(grid, by_prov, first_id=1)
    segments = segments_from_grid(
        grid,
        categories_by_id={sid: c.category_id for sid, c in by_final.items()},
        is_food_by_id={sid: True for sid in by_final},
    )
    return InstanceMap(id_grid=grid, segments=segments)


def candidate_filter_by_point(
    masks: MaskSet, boxes: DetectionSet
) -> dict[int, list[int]]:
    """For each mask, the detector boxes containing its prompt point.

    Containment is half-open: a point on the right or bottom edge is outside.
    """
    out: dict[int, list[int]] = {}
    for record in masks.records:
        out[record.mask_id] = [
            i for i, box in enumerate(boxes.boxes) if box_contains_point(box.xyxy, record.point_input)
        ]
    return out


def _mask_box_iou(record: MaskRecord, box: BoxXyxy, pixel_iou: bool) -> float:
    if not pixel_iou:
        return box_iou(record.bbox_xyxy, box)
    h, w = record.pixels.shape
    x0 = max(0, int(math.floor(box[0])))
    y0 = max(0, int(math.floor(box[1])))
    x1 = min(w, int(math.ceil(box[2])))
    y1 = min(h, int(math.ceil(box[3])))
    inter = int(record.pixels[y0:y1, x0:x1].sum()) if (x1 > x0 and y1 > y0) else 0
    box_area = (box[2] - box[0]) * (box[3] - box[1])
    union = record.area + box_area - inter
    return inter / union if union > 0 else 0.0


def match_background_masks(
    bg_masks: Sequence[MaskRecord],
    boxes: DetectionSet,
    params: AssemblyParams | None = None,
    candidates: Mapping[int, Sequence[int]] | None = None,
) -> list[tuple[int, int | None]]:
    """Assign a detector category to each background-voted mask, or None.

    Only boxes containing the mask's prompt point are considered; the best-IoU
    box wins and must exceed the threshold strictly, otherwise the mask keeps
    its background label (None).
    """
    params = params or AssemblyParams()
    assignments: list[tuple[int, int | None]] = []
    for record in bg_masks:
        if candidates is not None:
            box_ids = candidates.get(record.mask_id, [])
        else:
            box_ids = [
                i for i, box in enumerate(boxes.boxes)
                if box_contains_point(box.xyxy, record.point_input)
            ]
        best_iou = 0.0
        best_category: int | None = None
        for i in box_ids:
            iou = _mask_box_iou(record, boxes.boxes[i].xyxy, params.pixel_iou)
            if iou > best_iou:
                best_iou = iou
                best_category = boxes.boxes[i].category_id
        if best_iou > params.panoptic_iou_thresh:
            assignments.append((record.mask_id, best_category))
        else:
            assignments.append((record.mask_id, None))
    return assignments


def assemble_panoptic(
    instances: InstanceMap,
    nonfood: Sequence[tuple[MaskRecord, int]],
    categories: CategoryTable,
    params: AssemblyParams | None = None,
) -> PanopticMap:
    """Paint detector-labeled non-food masks beneath the food instances.

    Non-food masks follow the same small-mask merge rules, never overwrite
    food pixels, and get segment ids continuing after the last food id.
    """
    params = params or AssemblyParams()
    for _, category_id in nonfood:
        if category_id not in categories.nonfood_ids:
            raise SchemaError(f"category {category_id} is not a non-food id")
    height, width = instances.id_grid.shape
    food_grid = np.asarray(instances.id_grid)
    candidates = _merge_small(nonfood, (width, height), params)
    nf_grid, by_prov = _paint(candidates, (height, width), protect=food_grid != 0)
    first_id = max((s.segment_id for s in instances.segments), default=0) + 1
    nf_grid, _, by_final = _relabel_by_final_area(nf_grid, by_prov, first_id=first_id)
    nf_segments = segments_from_grid(
        nf_grid,
        categories_by_id={sid: c.category_id for sid, c in by_final.items()},
        is_food_by_id={sid: False for sid in by_final},
    )
    combined = np.where(food_grid != 0, food_grid, nf_grid).astype(np.uint16)
    return PanopticMap(id_grid=combined, segments=instances.segments + nf_segments)
