"""Compose fusion and assembly into whole-scene results, shared by cli and serve."""
from __future__ import annotations

from dataclasses import dataclass

from .assembly import (
    AssemblyParams,
    assemble_instances,
    assemble_panoptic,
    match_background_masks,
)
from .core import InstanceMap, LabelMap, PanopticMap, VoteOutcome
from .fusion import FusionParams, enhance, kept_masks
from .mask_io import SceneBundle


@dataclass(frozen=True)
class SceneResult:
    """Everything computed for one scene under one parameter set."""

    enhanced: LabelMap
    votes: tuple[VoteOutcome, ...]
    instances: InstanceMap
    panoptic: PanopticMap


def compute_scene(
    bundle: SceneBundle,
    fusion_params: FusionParams | None = None,
    assembly_params: AssemblyParams | None = None,
) -> SceneResult:
    """Run enhance -> instances -> panoptic for one scene."""
    fusion_params = fusion_params or FusionParams()
    assembly_params = assembly_params or AssemblyParams()
    categories = bundle.categories

    enhanced, votes = enhance(bundle, fusion_params)
    kept = kept_masks(bundle, votes, fusion_params)

    instances = assemble_instances(kept, bundle.size, categories, assembly_params)

    nonfood: list = []
    if bundle.detections is not None and len(bundle.detections) > 0:
        background = categories.background_id
        bg_records = [r for r, label in kept if label == background]
        by_id = {r.mask_id: r for r in bg_records}
        matches = match_background_masks(bg_records, bundle.detections, assembly_params)
        nonfood = [(by_id[mid], cat) for mid, cat in matches if cat is not None]
    panoptic = assemble_panoptic(instances, nonfood, categories, assembly_params)

    return SceneResult(
        enhanced=enhanced,
        votes=tuple(votes),
        instances=instances,
        panoptic=panoptic,
    )


def votes_payload(votes: tuple[VoteOutcome, ...], tau: float) -> list[dict]:
    """JSON-friendly vote ledger, ordered by mask id."""
    return [
        {
            "mask_id": v.mask_id,
            "winner": v.winner,
            "confused_degree": v.confused_degree,
            "footprint_size": v.footprint_size,
            "kept": v.confused_degree >= tau,
            "histogram": {str(k): v.histogram[k] for k in sorted(v.histogram)},
        }
        for v in sorted(votes, key=lambda v: v.mask_id)
    ]
