"""Shared domain types: category table, label maps, mask records, detections, segments."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DimMismatchError, EmptyMaskError, SchemaError

Bbox = tuple[int, int, int, int]  # (x0, y0, w, h), x = column, y = row, origin top-left
BoxXyxy = tuple[float, float, float, float]  # (x0, y0, x1, y1)


def _frozen(arr: np.ndarray) -> np.ndarray:
    """Return a read-only view so shared grids cannot be mutated in place."""
    out = np.asarray(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class CategoryTable:
    """Category ids and names, partitioned into food and non-food sets."""

    entries: tuple[tuple[int, str], ...]
    background_id: int = 0
    food_ids: frozenset[int] = field(default_factory=frozenset)
    nonfood_ids: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        ids = [cid for cid, _ in self.entries]
        if len(ids) != len(set(ids)):
            raise SchemaError("duplicate category ids")
        if self.background_id not in set(ids):
            raise SchemaError(f"background id {self.background_id} missing from entries")
        if self.food_ids & self.nonfood_ids:
            raise SchemaError("food and non-food id sets overlap")

    def name(self, category_id: int) -> str:
        for cid, name in self.entries:
            if cid == category_id:
                return name
        raise KeyError(category_id)

    def is_food(self, category_id: int) -> bool:
        return category_id in self.food_ids

    @property
    def semantic_class_count(self) -> int:
        """Number of label-map classes: max over background and food ids, plus one."""
        return max({self.background_id} | self.food_ids) + 1


def load_categories(path: str | Path) -> CategoryTable:
    """Parse a category table file.

    One entry per line: ``id<TAB>name`` with an optional third column
    ``food``/``nonfood``/``background``. Ids without a flag default to food,
    except the background id.
    """
    entries: list[tuple[int, str]] = []
    food: set[int] = set()
    nonfood: set[int] = set()
    background_id: int | None = None
    unflagged: list[int] = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise SchemaError(f"{path}:{lineno}: expected 'id<TAB>name'")
        try:
            cid = int(parts[0])
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: non-integer id {parts[0]!r}") from exc
        if cid < 0:
            raise SchemaError(f"{path}:{lineno}: negative id {cid}")
        entries.append((cid, parts[1]))
        if len(parts) >= 3 and parts[2]:
            flag = parts[2].strip().lower()
            if flag == "food":
                food.add(cid)
            elif flag == "nonfood":
                nonfood.add(cid)
            elif flag == "background":
                if background_id is not None:
                    raise SchemaError(f"{path}:{lineno}: multiple background rows")
                background_id = cid
            else:
                raise SchemaError(f"{path}:{lineno}: unknown flag {parts[2]!r}")
        else:
            unflagged.append(cid)
    if background_id is None:
        background_id = 0
    food.update(cid for cid in unflagged if cid != background_id)
    return CategoryTable(
        entries=tuple(entries),
        background_id=background_id,
        food_ids=frozenset(food),
        nonfood_ids=frozenset(nonfood),
    )


@dataclass(frozen=True)
class LabelMap:
    """A 2-D grid of category ids, row-major, shape (height, width)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 2:
            raise DimMismatchError(f"label map must be 2-D, got shape {self.data.shape}")
        object.__setattr__(self, "data", _frozen(self.data))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)


def tight_bbox(pixels: np.ndarray) -> Bbox:
    """Minimal (x0, y0, w, h) box covering all True pixels."""
    rows = np.flatnonzero(pixels.any(axis=1))
    if rows.size == 0:
        raise EmptyMaskError("mask has no foreground pixel")
    cols = np.flatnonzero(pixels.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def box_contains_point(box: BoxXyxy, point: tuple[float, float]) -> bool:
    """Half-open containment: x0 <= x < x1 and y0 <= y < y1."""
    x0, y0, x1, y1 = box
    x, y = point
    return x0 <= x < x1 and y0 <= y < y1


@dataclass(frozen=True)
class MaskRecord:
    """One binary mask proposal plus its generator metadata."""

    mask_id: int
    pixels: np.ndarray  # (H, W) bool, True = foreground
    area: int
    bbox: Bbox  # tight box of the True pixels, (x0, y0, w, h)
    predicted_iou: float = 1.0
    stability_score: float = 1.0
    point_input: tuple[float, float] = (0.0, 0.0)  # (x, y) prompt that produced the mask

    def __post_init__(self) -> None:
        if self.pixels.ndim != 2 or self.pixels.dtype != np.bool_:
            raise DimMismatchError("mask pixels must be a 2-D bool grid")
        h, w = self.pixels.shape
        x, y = self.point_input
        if not (0 <= x < w and 0 <= y < h):
            raise SchemaError(f"point_input {self.point_input} outside {w}x{h} image")
        object.__setattr__(self, "pixels", _frozen(self.pixels))

    @classmethod
    def from_pixels(
        cls,
        mask_id: int,
        pixels: np.ndarray,
        predicted_iou: float = 1.0,
        stability_score: float = 1.0,
        point_input: tuple[float, float] | None = None,
    ) -> "MaskRecord":
        """Build a record with area and bbox recomputed from the pixel grid."""
        pixels = np.asarray(pixels, dtype=bool)
        bbox = tight_bbox(pixels)
        if point_input is None:
            ys, xs = np.nonzero(pixels)
            point_input = (float(xs[0]), float(ys[0]))
        return cls(
            mask_id=mask_id,
            pixels=pixels,
            area=int(pixels.sum()),
            bbox=bbox,
            predicted_iou=predicted_iou,
            stability_score=stability_score,
            point_input=point_input,
        )

    @property
    def bbox_xyxy(self) -> BoxXyxy:
        x0, y0, w, h = self.bbox
        return (float(x0), float(y0), float(x0 + w), float(y0 + h))

    def centroid(self) -> tuple[float, float]:
        """(x, y) mean coordinate of the True pixels."""
        ys, xs = np.nonzero(self.pixels)
        if ys.size == 0:
            raise EmptyMaskError(f"mask {self.mask_id} has no foreground pixel")
        return (float(xs.mean()), float(ys.mean()))


@dataclass(frozen=True)
class MaskSet:
    """All mask proposals for one image."""

    width: int
    height: int
    records: tuple[MaskRecord, ...] = ()

    def __post_init__(self) -> None:
        ids = [r.mask_id for r in self.records]
        if len(ids) != len(set(ids)):
            raise SchemaError("mask ids are not unique")
        for r in self.records:
            if r.pixels.shape != (self.height, self.width):
                raise DimMismatchError(
                    f"mask {r.mask_id} is {r.pixels.shape}, expected {(self.height, self.width)}"
                )

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class DetectionBox:
    """One non-food detector box."""

    xyxy: BoxXyxy
    score: float
    category_id: int
    label: str = ""

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.xyxy
        if not (x1 > x0 and y1 > y0):
            raise SchemaError(f"degenerate box {self.xyxy}")


@dataclass(frozen=True)
class DetectionSet:
    """Detector boxes for one image, order preserved from the source file."""

    width: int
    height: int
    boxes: tuple[DetectionBox, ...] = ()

    def __len__(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True)
class VoteOutcome:
    """Majority-vote result for one mask against a label map."""

    mask_id: int
    histogram: Mapping[int, int]  # category id -> pixel count under the footprint
    winner: int
    confused_degree: float  # winner count / footprint size
    footprint_size: int


@dataclass(frozen=True)
class Segment:
    """One row of a segment table."""

    segment_id: int
    category_id: int
    area: int
    bbox: Bbox
    is_food: bool


@dataclass(frozen=True)
class SegmentMap:
    """A grid of segment ids (0 = no segment) plus the segment table."""

    id_grid: np.ndarray  # (H, W) integer segment ids
    segments: tuple[Segment, ...] = ()

    def __post_init__(self) -> None:
        if self.id_grid.ndim != 2:
            raise DimMismatchError("id grid must be 2-D")
        object.__setattr__(self, "id_grid", _frozen(self.id_grid))

    @property
    def width(self) -> int:
        return self.id_grid.shape[1]

    @property
    def height(self) -> int:
        return self.id_grid.shape[0]

    def segment(self, segment_id: int) -> Segment:
        for s in self.segments:
            if s.segment_id == segment_id:
                return s
        raise KeyError(segment_id)


class InstanceMap(SegmentMap):
    """Food segments only, ids 1..T."""


class PanopticMap(SegmentMap):
    """Food segments followed by detector-labeled non-food segments."""


def segments_from_grid(
    id_grid: np.ndarray,
    categories_by_id: Mapping[int, int],
    is_food_by_id: Mapping[int, bool],
) -> tuple[Segment, ...]:
    """Rebuild a segment table from a painted grid: areas and tight bboxes per id."""
    segs = []
    for sid in np.unique(id_grid):
        sid = int(sid)
        if sid == 0:
            continue
        mask = id_grid == sid
        segs.append(
            Segment(
                segment_id=sid,
                category_id=categories_by_id[sid],
                area=int(mask.sum()),
                bbox=tight_bbox(mask),
                is_food=is_food_by_id[sid],
            )
        )
    return tuple(segs)
