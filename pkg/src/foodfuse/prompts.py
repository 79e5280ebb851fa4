"""Prompt-prior selection: map point/box/mask/regular prompts to detector boxes
and to the panoptic segments they touch."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .assembly import box_iou
from .core import BoxXyxy, CategoryTable, DetectionSet, PanopticMap, box_contains_point
from .errors import DimMismatchError, EmptyMaskError, OutOfBoundsError, SchemaError
from .mask_io import rle_encode, segment_color

PROMPT_KINDS = ("point", "box", "mask", "regular")
DEFAULT_MASK_SAMPLES = 32


@dataclass(frozen=True)
class Prompt:
    """One user prompt; the payload depends on the kind."""

    kind: str
    point: tuple[float, float] | None = None
    box: BoxXyxy | None = None
    mask: np.ndarray | None = None  # (H, W) bool

    def __post_init__(self) -> None:
        if self.kind not in PROMPT_KINDS:
            raise SchemaError(f"prompt kind must be one of {PROMPT_KINDS}, got {self.kind!r}")
        payload = {"point": self.point, "box": self.box, "mask": self.mask}
        required = payload.get(self.kind)
        if self.kind != "regular" and required is None:
            raise SchemaError(f"{self.kind} prompt is missing its geometry")
        stray = [k for k, v in payload.items() if v is not None and k != self.kind]
        if stray:
            raise SchemaError(f"{self.kind} prompt carries unrelated geometry: {stray}")


@dataclass(frozen=True)
class SelectedSegment:
    """One panoptic segment picked by a prompt, with its RLE mask."""

    segment_id: int
    category_id: int
    source: str  # "food" | "nonfood"
    rle: tuple[int, ...]
    area: int


@dataclass(frozen=True)
class PromptResult:
    segments: tuple[SelectedSegment, ...]
    box_ids: tuple[int, ...]


def _center_distance_ratio(point: tuple[float, float], box: BoxXyxy) -> float:
    """Distance from the point to the box center, normalized by the box diagonal."""
    cx = (box[0] + box[2]) / 2.0
    cy = (box[1] + box[3]) / 2.0
    diag = math.hypot(box[2] - box[0], box[3] - box[1])
    return math.dist(point, (cx, cy)) / diag


def _box_area(box: BoxXyxy) -> float:
    return (box[2] - box[0]) * (box[3] - box[1])


def select_by_point(point: tuple[float, float], boxes: DetectionSet) -> int | None:
    """Pick the most-centered box containing the point, or None.

    Ties go to the smaller box, then the lower index.
    """
    best: int | None = None
    best_key: tuple[float, float, int] | None = None
    for i, box in enumerate(boxes.boxes):
        if not box_contains_point(box.xyxy, point):
            continue
        key = (_center_distance_ratio(point, box.xyxy), _box_area(box.xyxy), i)
        if best_key is None or key < best_key:
            best, best_key = i, key
    return best


def select_by_box(query: BoxXyxy, boxes: DetectionSet) -> int | None:
    """Pick the detected box with the highest IoU against the prompt box.

    Returns None when every IoU is zero; ties go to the lower index.
    """
    best: int | None = None
    best_iou = 0.0
    for i, box in enumerate(boxes.boxes):
        iou = box_iou(query, box.xyxy)
        if iou > best_iou:
            best, best_iou = i, iou
    return best


def sample_mask_points(
    mask: np.ndarray, n_samples: int, seed: int = 0
) -> list[tuple[float, float]]:
    """Deterministic stratified sample of (x, y) points from the True pixels.

    The footprint is walked in row-major order and split into equal strata;
    one pixel is drawn per stratum with a fixed-seed generator.
    """
    coords = np.argwhere(mask)  # (y, x) rows in row-major order
    if coords.shape[0] == 0:
        raise EmptyMaskError("mask prompt has no foreground pixel")
    n = min(n_samples, coords.shape[0])
    rng = np.random.default_rng(seed)
    points = []
    total = coords.shape[0]
    for i in range(n):
        lo = i * total // n
        hi = (i + 1) * total // n
        y, x = coords[lo + int(rng.integers(hi - lo))]
        points.append((float(x), float(y)))
    return points


def select_by_mask(
    mask: np.ndarray,
    boxes: DetectionSet,
    n_samples: int = DEFAULT_MASK_SAMPLES,
    seed: int = 0,
) -> int | None:
    """Vote over sampled footprint points; the box selected most often wins.

    Ties go to the lower index; None when no sample selects a box.
    """
    votes = Counter()
    for point in sample_mask_points(mask, n_samples, seed=seed):
        chosen = select_by_point(point, boxes)
        if chosen is not None:
            votes[chosen] += 1
    if not votes:
        return None
    return min(votes, key=lambda i: (-votes[i], i))


def select_regular(boxes: DetectionSet) -> list[int]:
    """The regular prompt keeps every detected box, in input order."""
    return list(range(len(boxes.boxes)))


def _segment_result(panoptic: PanopticMap, segment_ids: list[int]) -> tuple[SelectedSegment, ...]:
    grid = np.asarray(panoptic.id_grid)
    out = []
    for sid in segment_ids:
        seg = panoptic.segment(sid)
        pixels = grid == sid
        out.append(
            SelectedSegment(
                segment_id=sid,
                category_id=seg.category_id,
                source="food" if seg.is_food else "nonfood",
                rle=tuple(rle_encode(pixels)),
                area=seg.area,
            )
        )
    return tuple(out)


def _overlap_ranked(grid: np.ndarray, region: np.ndarray) -> list[int]:
    """Segment ids with nonzero overlap against a boolean region, ranked by
    intersection area descending (ties: segment id ascending)."""
    ids, counts = np.unique(grid[region], return_counts=True)
    pairs = [(int(c), int(sid)) for sid, c in zip(ids, counts) if sid != 0]
    pairs.sort(key=lambda pc: (-pc[0], pc[1]))
    return [sid for _, sid in pairs]


def promptable_segment(
    panoptic: PanopticMap,
    detections: DetectionSet | None,
    prompt: Prompt,
    n_samples: int = DEFAULT_MASK_SAMPLES,
    seed: int = 0,
) -> PromptResult:
    """Resolve a prompt against a precomputed panoptic map and detector boxes.

    Point prompts return the covering segment (plus the box selection when the
    point is not on food); box/mask prompts return every overlapped segment
    ranked by intersection; regular returns everything.
    """
    grid = np.asarray(panoptic.id_grid)
    height, width = grid.shape
    boxes = detections if detections is not None else DetectionSet(width, height)

    if prompt.kind == "point":
        x, y = prompt.point
        if not (0 <= x < width and 0 <= y < height):
            raise OutOfBoundsError(f"point {prompt.point} outside {width}x{height} image")
        sid = int(grid[int(y), int(x)])
        segment_ids = [sid] if sid != 0 else []
        box_ids: list[int] = []
        if sid == 0 or not panoptic.segment(sid).is_food:
            chosen = select_by_point((x, y), boxes)
            if chosen is not None:
                box_ids = [chosen]
        return PromptResult(_segment_result(panoptic, segment_ids), tuple(box_ids))

    if prompt.kind == "box":
        x0, y0, x1, y1 = prompt.box
        if x1 <= x0 or y1 <= y0:
            raise SchemaError(f"degenerate box prompt {prompt.box}")
        cx0 = max(0, int(math.floor(x0)))
        cy0 = max(0, int(math.floor(y0)))
        cx1 = min(width, int(math.ceil(x1)))
        cy1 = min(height, int(math.ceil(y1)))
        if cx1 <= cx0 or cy1 <= cy0:
            raise OutOfBoundsError(f"box prompt {prompt.box} outside {width}x{height} image")
        region = np.zeros_like(grid, dtype=bool)
        region[cy0:cy1, cx0:cx1] = True
        segment_ids = _overlap_ranked(grid, region)
        chosen = select_by_box(prompt.box, boxes)
        return PromptResult(
            _segment_result(panoptic, segment_ids),
            (chosen,) if chosen is not None else (),
        )

    if prompt.kind == "mask":
        mask = np.asarray(prompt.mask, dtype=bool)
        if mask.shape != grid.shape:
            raise DimMismatchError(f"mask prompt is {mask.shape}, scene is {grid.shape}")
        if mask.all():  # the regular prompt is a mask covering the whole image
            return promptable_segment(panoptic, detections, Prompt(kind="regular"))
        segment_ids = _overlap_ranked(grid, mask)
        chosen = select_by_mask(mask, boxes, n_samples=n_samples, seed=seed)
        return PromptResult(
            _segment_result(panoptic, segment_ids),
            (chosen,) if chosen is not None else (),
        )

    # regular: all segments (food first as stored), all boxes
    segment_ids = [s.segment_id for s in panoptic.segments]
    return PromptResult(_segment_result(panoptic, segment_ids), tuple(select_regular(boxes)))


def result_to_json(
    result: PromptResult,
    categories: CategoryTable,
    detections: DetectionSet | None = None,
) -> dict:
    """Serialize a prompt result for the CLI and the HTTP API.

    Adds category names and a stable per-segment display color so clients can
    render without a second lookup.
    """
    segments = []
    for seg in result.segments:
        segments.append(
            {
                "segment_id": seg.segment_id,
                "category_id": seg.category_id,
                "category_name": categories.name(seg.category_id),
                "source": seg.source,
                "area": seg.area,
                "rle": list(seg.rle),
                "color": list(segment_color(seg.segment_id)),
            }
        )
    boxes = []
    if detections is not None:
        for index in result.box_ids:
            box = detections.boxes[index]
            boxes.append(
                {
                    "index": index,
                    "xyxy": list(box.xyxy),
                    "score": box.score,
                    "category_id": box.category_id,
                    "label": box.label,
                }
            )
    return {"segments": segments, "box_ids": list(result.box_ids), "boxes": boxes}
