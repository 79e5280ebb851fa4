"""Enhance a coarse semantic map: vote a category per mask, filter, and merge."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LabelMap, MaskRecord, VoteOutcome
from .errors import DimMismatchError, EmptyMaskError, SchemaError
from .mask_io import SceneBundle

SORT_ORDERS = ("area_desc", "area_asc", "iou_desc", "iou_asc")


@dataclass(frozen=True)
class FusionParams:
    """Knobs for the vote/filter/merge stage."""

    tau: float = 0.5  # reject masks with confused degree strictly below this
    top_k: int | None = None  # cap on masks, selected by descending area
    sort_order: str = "area_desc"  # paint order; later paints win overlaps
    skip_background_paint: bool = False  # leave background-voted masks out of the merge

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise SchemaError(f"tau must be in [0, 1], got {self.tau}")
        if self.top_k is not None and self.top_k < 0:
            raise SchemaError(f"top_k must be >= 0, got {self.top_k}")
        if self.sort_order not in SORT_ORDERS:
            raise SchemaError(f"sort_order must be one of {SORT_ORDERS}, got {self.sort_order!r}")


def vote_mask_label(record: MaskRecord, semantic: LabelMap) -> VoteOutcome:
    """Majority-vote the semantic labels under a mask footprint.

    The winner is the most frequent label, ties broken by lowest category id;
    the confused degree is the winner's share of the footprint.
    """
    if record.pixels.shape != semantic.data.shape:
        raise DimMismatchError(
            f"mask {record.mask_id} is {record.pixels.shape}, map is {semantic.data.shape}"
        )
    values = semantic.data[record.pixels]
    if values.size == 0:
        raise EmptyMaskError(f"mask {record.mask_id} has no foreground pixel")
    counts = np.bincount(values.astype(np.int64))
    winner = int(np.argmax(counts))  # argmax returns the first max: lowest id wins ties
    histogram = {int(i): int(c) for i, c in enumerate(counts) if c > 0}
    return VoteOutcome(
        mask_id=record.mask_id,
        histogram=histogram,
        winner=winner,
        confused_degree=float(counts[winner] / values.size),
        footprint_size=int(values.size),
    )


def filter_confused(
    votes: Sequence[VoteOutcome], tau: float
) -> tuple[list[VoteOutcome], list[VoteOutcome]]:
    """Split votes into (kept, rejected); rejection is strictly d < tau."""
    kept = [v for v in votes if v.confused_degree >= tau]
    rejected = [v for v in votes if v.confused_degree < tau]
    return kept, rejected


def top_k_by_area(records: Sequence[MaskRecord], k: int | None) -> list[MaskRecord]:
    """Select up to k masks by descending area (ties: mask_id ascending)."""
    ordered = sorted(records, key=lambda r: (-r.area, r.mask_id))
    return ordered if k is None else ordered[:k]


def sort_for_merge(
    labeled: Sequence[tuple[MaskRecord, int]], sort_order: str
) -> list[tuple[MaskRecord, int]]:
    """Order (mask, label) pairs for painting; equal keys fall back to mask_id."""
    keys = {
        "area_desc": lambda r: (-r.area, r.mask_id),
        "area_asc": lambda r: (r.area, r.mask_id),
        "iou_desc": lambda r: (-r.predicted_iou, r.mask_id),
        "iou_asc": lambda r: (r.predicted_iou, r.mask_id),
    }
    if sort_order not in keys:
        raise SchemaError(f"unknown sort order {sort_order!r}")
    key = keys[sort_order]
    return sorted(labeled, key=lambda pair: key(pair[0]))


def merge_masks(
    semantic: LabelMap,
    kept: Sequence[tuple[MaskRecord, int]],
    params: FusionParams,
) -> LabelMap:
    """Paint labeled masks onto a copy of the coarse map.

    Masks are painted in the configured sort order with later paints
    overwriting earlier ones, so area_desc leaves the smallest masks on top.
    Pixels under no mask keep their coarse labels.
    """
    out = np.array(semantic.data, copy=True)
    for record, label in sort_for_merge(kept, params.sort_order):
        if record.pixels.shape != out.shape:
            raise DimMismatchError(
                f"mask {record.mask_id} is {record.pixels.shape}, map is {out.shape}"
            )
        out[record.pixels] = label
    return LabelMap(out)


def enhance_from_votes(
    semantic: LabelMap,
    selected: Sequence[MaskRecord],
    votes: Sequence[VoteOutcome],
    params: FusionParams,
    background_id: int = 0,
) -> LabelMap:
    """Filter and merge pre-computed votes; lets sweeps reuse one vote ledger."""
    outcome = {v.mask_id: v for v in votes}
    labeled = [
        (r, outcome[r.mask_id].winner)
        for r in selected
        if outcome[r.mask_id].confused_degree >= params.tau
    ]
    if params.skip_background_paint:
        labeled = [(r, label) for r, label in labeled if label != background_id]
    return merge_masks(semantic, labeled, params)


def enhance(
    bundle: SceneBundle, params: FusionParams | None = None
) -> tuple[LabelMap, list[VoteOutcome]]:
    """Run the full vote -> filter -> merge stage for one scene.

    Returns the enhanced map and the vote ledger (mask_id ascending) for every
    mask that survived the top-k cap, kept or not.
    """
    params = params or FusionParams()
    selected = top_k_by_area(bundle.masks.records, params.top_k)
    votes = sorted(
        (vote_mask_label(r, bundle.semantic) for r in selected),
        key=lambda v: v.mask_id,
    )
    enhanced = enhance_from_votes(
        bundle.semantic, selected, votes, params, bundle.categories.background_id
    )
    return enhanced, votes


def kept_masks(
    bundle: SceneBundle, votes: Sequence[VoteOutcome], params: FusionParams
) -> list[tuple[MaskRecord, int]]:
    """(mask, winner) pairs that pass the confused filter, for the later stages."""
    by_id = {r.mask_id: r for r in bundle.masks.records}
    kept_votes, _ = filter_confused(votes, params.tau)
    return [(by_id[v.mask_id], v.winner) for v in kept_votes]
