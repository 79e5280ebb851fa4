"""Synthetic demo scene: a 64x64 image with three food objects on a plate.

The ground truth is known exactly and the coarse map erodes every object
boundary by two pixels, so the mask-merge stage can restore it. Used by the
test suite, the web-console smoke test, and `scripts/make_demo_scene.py`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import (
    CategoryTable,
    DetectionBox,
    DetectionSet,
    LabelMap,
    MaskRecord,
    MaskSet,
)
from .mask_io import colorize_labels, save_label_map, save_mask_set

SIZE = 64
BACKGROUND = 0
RICE, EGG, BROCCOLI = 1, 2, 3
PLATE, TABLE = 10, 11

CATEGORY_LINES = (
    "0\tbackground\tbackground",
    "1\trice\tfood",
    "2\tegg\tfood",
    "3\tbroccoli\tfood",
    "10\tplate\tnonfood",
    "11\ttable\tnonfood",
)

# (label, row0, row1, col0, col1) half-open pixel rectangles, pairwise disjoint
FOOD_RECTS = (
    (RICE, 6, 26, 6, 26),  # area 400
    (EGG, 6, 22, 34, 58),  # area 384
    (BROCCOLI, 38, 56, 38, 56),  # area 324
)
PLATE_RECT = (30, 62, 2, 32)  # area 960, disjoint from all food rects
ERODE = 2  # pixels trimmed from each rectangle side in the coarse map


@dataclass(frozen=True)
class DemoScene:
    categories: CategoryTable
    gt: LabelMap
    coarse: LabelMap
    masks: MaskSet
    detections: DetectionSet
    plate_point: tuple[int, int]  # (x, y) guaranteed on the plate segment
    food_point: tuple[int, int]  # (x, y) guaranteed on the largest food segment
    baseline_miou: float  # score of the uncorrected coarse map, own recount


def _rect_mask(row0: int, row1: int, col0: int, col1: int) -> np.ndarray:
    m = np.zeros((SIZE, SIZE), dtype=bool)
    m[row0:row1, col0:col1] = True
    return m


def _recount_miou(pred: np.ndarray, gt: np.ndarray, n_classes: int) -> float:
    """Plain per-pixel recount, deliberately independent of the metrics module."""
    ious = []
    for c in range(n_classes):
        tp = int(np.sum((pred == c) & (gt == c)))
        fp = int(np.sum((pred == c) & (gt != c)))
        fn = int(np.sum((pred != c) & (gt == c)))
        if tp + fp + fn:
            ious.append(tp / (tp + fp + fn))
    return sum(ious) / len(ious)


def build_demo_scene() -> DemoScene:
    """Construct the scene in memory."""
    categories = CategoryTable(
        entries=tuple(
            (int(line.split("\t")[0]), line.split("\t")[1]) for line in CATEGORY_LINES
        ),
        background_id=BACKGROUND,
        food_ids=frozenset({RICE, EGG, BROCCOLI}),
        nonfood_ids=frozenset({PLATE, TABLE}),
    )

    gt = np.zeros((SIZE, SIZE), dtype=np.uint8)
    coarse = np.zeros((SIZE, SIZE), dtype=np.uint8)
    records = []
    ious = {RICE: 0.97, EGG: 0.95, BROCCOLI: 0.93}
    for mask_id, (label, r0, r1, c0, c1) in enumerate(FOOD_RECTS):
        support = _rect_mask(r0, r1, c0, c1)
        gt[support] = label
        coarse[_rect_mask(r0 + ERODE, r1 - ERODE, c0 + ERODE, c1 - ERODE)] = label
        center = ((c0 + c1) // 2, (r0 + r1) // 2)  # (x, y)
        records.append(
            MaskRecord.from_pixels(
                mask_id,
                support,
                predicted_iou=ious[label],
                stability_score=0.96,
                point_input=(float(center[0]), float(center[1])),
            )
        )

    r0, r1, c0, c1 = PLATE_RECT
    plate_support = _rect_mask(r0, r1, c0, c1)
    plate_point = ((c0 + c1) // 2, (r0 + r1) // 2)
    records.append(
        MaskRecord.from_pixels(
            3,
            plate_support,
            predicted_iou=0.99,
            stability_score=0.98,
            point_input=(float(plate_point[0]), float(plate_point[1])),
        )
    )

    detections = DetectionSet(
        width=SIZE,
        height=SIZE,
        boxes=(
            DetectionBox(
                xyxy=(float(c0), float(r0), float(c1), float(r1)),
                score=0.9,
                category_id=PLATE,
                label="plate",
            ),
            DetectionBox(
                xyxy=(0.0, 0.0, float(SIZE), float(SIZE)),
                score=0.5,
                category_id=TABLE,
                label="table",
            ),
        ),
    )

    rice_center = ((FOOD_RECTS[0][3] + FOOD_RECTS[0][4]) // 2, (FOOD_RECTS[0][1] + FOOD_RECTS[0][2]) // 2)
    return DemoScene(
        categories=categories,
        gt=LabelMap(gt),
        coarse=LabelMap(coarse),
        masks=MaskSet(width=SIZE, height=SIZE, records=tuple(records)),
        detections=detections,
        plate_point=plate_point,
        food_point=rice_center,
        baseline_miou=_recount_miou(coarse, gt, categories.semantic_class_count),
    )


def write_demo_scene(root: str | Path, scene_id: str = "demo") -> Path:
    """Write the scene in the data-root layout consumed by the CLI and server.

    root/
      categories.tsv
      <scene_id>/semantic.png + sam/ + detections.json + image.png
      gt/<scene_id>.png
      meta.json
    """
    root = Path(root)
    scene = build_demo_scene()
    scene_dir = root / scene_id
    scene_dir.mkdir(parents=True, exist_ok=True)

    (root / "categories.tsv").write_text("\n".join(CATEGORY_LINES) + "\n", encoding="utf-8")
    save_label_map(scene.coarse, scene_dir / "semantic.png")
    save_mask_set(scene.masks, scene_dir / "sam")
    boxes = [
        {
            "xyxy": list(b.xyxy),
            "score": b.score,
            "category_id": b.category_id,
            "label": b.label,
        }
        for b in scene.detections.boxes
    ]
    (scene_dir / "detections.json").write_text(
        json.dumps({"boxes": boxes}, indent=2) + "\n", encoding="utf-8"
    )
    Image.fromarray(colorize_labels(scene.gt), mode="RGB").save(scene_dir / "image.png")

    gt_dir = root / "gt"
    gt_dir.mkdir(parents=True, exist_ok=True)
    save_label_map(scene.gt, gt_dir / f"{scene_id}.png")

    (root / "meta.json").write_text(
        json.dumps(
            {
                "scene_id": scene_id,
                "size": [SIZE, SIZE],
                "plate_point": list(scene.plate_point),
                "food_point": list(scene.food_point),
                "plate_category": "plate",
                "food_category": "rice",
                "baseline_miou": scene.baseline_miou,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return root
