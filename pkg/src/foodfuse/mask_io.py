"""Disk formats: label-map PNGs, mask directories, detection JSON, segment maps, RLE."""
from __future__ import annotations

import colorsys
import csv
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import (
    CategoryTable,
    DetectionBox,
    DetectionSet,
    InstanceMap,
    LabelMap,
    MaskRecord,
    MaskSet,
    PanopticMap,
    Segment,
    SegmentMap,
    tight_bbox,
)
from .errors import (
    CsvSchemaError,
    DimMismatchError,
    FormatError,
    LengthMismatchError,
    MissingMaskFileError,
    SchemaError,
)

log = logging.getLogger("foodfuse.mask_io")

MASK_CSV_COLUMNS = (
    "id",
    "area",
    "bbox_x0",
    "bbox_y0",
    "bbox_w",
    "bbox_h",
    "point_input_x",
    "point_input_y",
    "predicted_iou",
    "stability_score",
    "crop_box_x0",
    "crop_box_y0",
    "crop_box_w",
    "crop_box_h",
)


# ---------------------------------------------------------------------------
# label maps

def load_label_map(path: str | Path) -> LabelMap:
    """Read an 8-bit single-channel PNG; pixel value v becomes category id v."""
    with Image.open(path) as im:
        if im.mode not in ("L", "P"):
            raise FormatError(f"{path}: expected 8-bit single-channel PNG, got mode {im.mode!r}")
        data = np.asarray(im, dtype=np.uint8)
    return LabelMap(data)


def save_label_map(label_map: LabelMap, path: str | Path) -> None:
    """Write a label map as an 8-bit single-channel PNG."""
    arr = np.asarray(label_map.data)
    if arr.max(initial=0) > 255:
        raise FormatError("label map values exceed 8-bit range")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)


def encode_label_png(label_map: LabelMap) -> bytes:
    """In-memory PNG bytes for a label map, same encoding as save_label_map."""
    arr = np.asarray(label_map.data)
    if arr.max(initial=0) > 255:
        raise FormatError("label map values exceed 8-bit range")
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def encode_rgb_png(rgb: np.ndarray) -> bytes:
    """In-memory PNG bytes for an (H, W, 3) uint8 image."""
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# mask directories

def load_mask_set(
    directory: str | Path,
    image_size: tuple[int, int] | None = None,
    trust_metadata: bool = False,
) -> MaskSet:
    """Read a mask directory: metadata.csv plus one binary {id}.png per row.

    Pixels are authoritative: unless ``trust_metadata`` is set, area and bbox
    are recomputed from the PNG and override the CSV with a warning on
    disagreement.
    """
    directory = Path(directory)
    csv_path = directory / "metadata.csv"
    if not csv_path.is_file():
        raise MissingMaskFileError(f"{csv_path} not found")
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in MASK_CSV_COLUMNS if c not in header]
        if missing:
            raise CsvSchemaError(f"{csv_path}: missing columns {missing}")
        rows = list(reader)

    records: list[MaskRecord] = []
    dims: tuple[int, int] | None = None  # (height, width)
    if image_size is not None:
        dims = (image_size[1], image_size[0])
    for row in rows:
        try:
            mask_id = int(row["id"])
            csv_area = int(row["area"])
            csv_bbox = tuple(int(float(row[k])) for k in ("bbox_x0", "bbox_y0", "bbox_w", "bbox_h"))
            point = (float(row["point_input_x"]), float(row["point_input_y"]))
            pred_iou = float(row["predicted_iou"])
            stability = float(row["stability_score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CsvSchemaError(f"{csv_path}: malformed row {row!r}") from exc
        png = directory / f"{mask_id}.png"
        if not png.is_file():
            raise MissingMaskFileError(f"{png} referenced by metadata.csv is missing")
        with Image.open(png) as im:
            pixels = np.asarray(im.convert("L")) > 127
        if dims is None:
            dims = pixels.shape
        elif pixels.shape != dims:
            raise DimMismatchError(f"{png}: mask is {pixels.shape}, expected {dims}")
        if trust_metadata:
            records.append(
                MaskRecord(
                    mask_id=mask_id,
                    pixels=pixels,
                    area=csv_area,
                    bbox=csv_bbox,
                    predicted_iou=pred_iou,
                    stability_score=stability,
                    point_input=point,
                )
            )
            continue
        area = int(pixels.sum())
        bbox = tight_bbox(pixels)
        if area != csv_area or bbox != csv_bbox:
            log.warning(
                "mask %s: metadata disagrees with pixels (area %s->%s, bbox %s->%s); using pixels",
                mask_id, csv_area, area, csv_bbox, bbox,
            )
        records.append(
            MaskRecord(
                mask_id=mask_id,
                pixels=pixels,
                area=area,
                bbox=bbox,
                predicted_iou=pred_iou,
                stability_score=stability,
                point_input=point,
            )
        )
    if dims is None:
        dims = (0, 0)
    return MaskSet(width=dims[1], height=dims[0], records=tuple(records))


def save_mask_set(masks: MaskSet, directory: str | Path) -> None:
    """Write a mask directory in the metadata.csv + {id}.png layout."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "metadata.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MASK_CSV_COLUMNS)
        for r in masks.records:
            x0, y0, w, h = r.bbox
            writer.writerow(
                [
                    r.mask_id, r.area, x0, y0, w, h,
                    r.point_input[0], r.point_input[1],
                    r.predicted_iou, r.stability_score,
                    0, 0, masks.width, masks.height,
                ]
            )
            arr = (r.pixels.astype(np.uint8)) * 255
            Image.fromarray(arr, mode="L").save(directory / f"{r.mask_id}.png")


# ---------------------------------------------------------------------------
# run-length encoding (column-major, first count is the run of False)

def rle_encode(pixels: np.ndarray) -> list[int]:
    """Encode a binary grid as column-major run lengths starting with False."""
    flat = np.asarray(pixels, dtype=bool).ravel(order="F")
    if flat.size == 0:
        return []
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def rle_decode(counts: list[int], size: tuple[int, int]) -> np.ndarray:
    """Decode column-major run lengths into a (height, width) bool grid."""
    width, height = size
    total = width * height
    if sum(counts) != total:
        raise LengthMismatchError(f"RLE counts sum to {sum(counts)}, expected {total}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        if c:
            flat[pos : pos + c] = value
        pos += c
        value = not value
    return flat.reshape((height, width), order="F")


# ---------------------------------------------------------------------------
# detections

def load_detections(path: str | Path, image_size: tuple[int, int]) -> DetectionSet:
    """Read detector boxes from JSON, clamping to image bounds.

    Boxes with zero area after clamping are dropped with a warning.
    """
    width, height = image_size
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("boxes"), list):
        raise SchemaError(f'{path}: expected {{"boxes": [...]}}')
    boxes: list[DetectionBox] = []
    for i, entry in enumerate(doc["boxes"]):
        try:
            x0, y0, x1, y1 = (float(v) for v in entry["xyxy"])
            score = float(entry["score"])
            category_id = int(entry["category_id"])
            label = str(entry.get("label", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: malformed box entry {i}") from exc
        x0, x1 = max(0.0, x0), min(float(width), x1)
        y0, y1 = max(0.0, y0), min(float(height), y1)
        if x1 <= x0 or y1 <= y0:
            log.warning("%s: box %d has zero area after clamping, dropped", path, i)
            continue
        boxes.append(DetectionBox(xyxy=(x0, y0, x1, y1), score=score, category_id=category_id, label=label))
    return DetectionSet(width=width, height=height, boxes=tuple(boxes))


# ---------------------------------------------------------------------------
# segment maps (instance / panoptic)

GOLDEN_RATIO_CONJUGATE = 0.618033988749895


def segment_color(segment_id: int) -> tuple[int, int, int]:
    """Deterministic per-segment RGB color via golden-ratio hue stepping."""
    if segment_id == 0:
        return (0, 0, 0)
    hue = (segment_id * GOLDEN_RATIO_CONJUGATE) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.95)
    return (int(r * 255), int(g * 255), int(b * 255))


def colorize_segments(id_grid: np.ndarray) -> np.ndarray:
    """Render a segment id grid as an RGB array with the deterministic palette."""
    ids = np.unique(id_grid)
    lut = np.zeros((int(ids.max(initial=0)) + 1, 3), dtype=np.uint8)
    for sid in ids:
        lut[int(sid)] = segment_color(int(sid))
    return lut[id_grid]


def colorize_labels(label_map: LabelMap) -> np.ndarray:
    """Render a label map as RGB (background stays black)."""
    return colorize_segments(np.asarray(label_map.data))


def _save_segment_map(smap: SegmentMap, directory: Path, stem: str, categories: CategoryTable) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    grid = np.asarray(smap.id_grid)
    if grid.max(initial=0) > np.iinfo(np.uint16).max:
        raise FormatError("segment ids exceed 16-bit range")
    id_path = directory / f"{stem}.png"
    Image.fromarray(grid.astype(np.uint16)).save(id_path)
    table = [
        {
            "segment_id": s.segment_id,
            "category_id": s.category_id,
            "category_name": categories.name(s.category_id),
            "area": s.area,
            "bbox": list(s.bbox),
            "is_food": s.is_food,
        }
        for s in smap.segments
    ]
    json_path = directory / f"{stem}_segments.json"
    json_path.write_text(
        json.dumps({"segments": table}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    color_path = directory / f"{stem}_color.png"
    Image.fromarray(colorize_segments(grid), mode="RGB").save(color_path)
    return [id_path, json_path, color_path]


def save_instance_map(imap: InstanceMap, directory: str | Path, categories: CategoryTable, stem: str = "instance") -> list[Path]:
    """Write id grid (16-bit PNG), segment table (JSON), and a colorized preview."""
    return _save_segment_map(imap, Path(directory), stem, categories)


def save_panoptic_map(pmap: PanopticMap, directory: str | Path, categories: CategoryTable, stem: str = "panoptic") -> list[Path]:
    """Write id grid (16-bit PNG), segment table (JSON), and a colorized preview."""
    return _save_segment_map(pmap, Path(directory), stem, categories)


def _load_segment_map(directory: Path, stem: str) -> tuple[np.ndarray, tuple[Segment, ...]]:
    png = directory / f"{stem}.png"
    with Image.open(png) as im:
        grid = np.asarray(im)
    if grid.dtype not in (np.uint8, np.uint16, np.int32):
        raise FormatError(f"{png}: expected integer id grid, got {grid.dtype}")
    grid = grid.astype(np.uint16)
    doc = json.loads((directory / f"{stem}_segments.json").read_text(encoding="utf-8"))
    segments = tuple(
        Segment(
            segment_id=int(e["segment_id"]),
            category_id=int(e["category_id"]),
            area=int(e["area"]),
            bbox=tuple(int(v) for v in e["bbox"]),
            is_food=bool(e["is_food"]),
        )
        for e in doc["segments"]
    )
    return grid, segments


def load_instance_map(directory: str | Path, stem: str = "instance") -> InstanceMap:
    grid, segments = _load_segment_map(Path(directory), stem)
    return InstanceMap(id_grid=grid, segments=segments)


def load_panoptic_map(directory: str | Path, stem: str = "panoptic") -> PanopticMap:
    grid, segments = _load_segment_map(Path(directory), stem)
    return PanopticMap(id_grid=grid, segments=segments)


# ---------------------------------------------------------------------------
# scene bundles

@dataclass(frozen=True)
class SceneBundle:
    """Everything the pipeline consumes for one image."""

    semantic: LabelMap
    masks: MaskSet
    categories: CategoryTable
    detections: DetectionSet | None = None
    image_path: Path | None = None

    def __post_init__(self) -> None:
        if self.masks.records and (self.masks.width, self.masks.height) != self.semantic.size:
            raise DimMismatchError(
                f"masks are {self.masks.width}x{self.masks.height}, "
                f"semantic map is {self.semantic.width}x{self.semantic.height}"
            )
        if self.detections is not None:
            known = {cid for cid, _ in self.categories.entries}
            for box in self.detections.boxes:
                if box.category_id not in known:
                    raise SchemaError(f"detection category {box.category_id} not in category table")

    @property
    def size(self) -> tuple[int, int]:
        return self.semantic.size


def load_scene(
    semantic_path: str | Path,
    mask_dir: str | Path,
    categories: CategoryTable,
    detections_path: str | Path | None = None,
    image_path: str | Path | None = None,
    trust_metadata: bool = False,
) -> SceneBundle:
    """Load a full scene from its on-disk artifacts."""
    semantic = load_label_map(semantic_path)
    masks = load_mask_set(mask_dir, image_size=semantic.size, trust_metadata=trust_metadata)
    detections = None
    if detections_path is not None:
        detections = load_detections(detections_path, semantic.size)
    return SceneBundle(
        semantic=semantic,
        masks=masks,
        categories=categories,
        detections=detections,
        image_path=Path(image_path) if image_path else None,
    )
