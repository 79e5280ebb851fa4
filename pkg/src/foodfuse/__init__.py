"""foodfuse: fuse class-agnostic mask proposals with coarse semantic labels.

The package turns three kinds of model output, read from disk, into enhanced
semantic, instance, and panoptic label maps:

* a coarse per-pixel category map (8-bit PNG),
* a directory of binary mask proposals with a metadata CSV,
* optional object detections (JSON boxes) for non-food things.

No neural network runs here; everything is deterministic array work.
"""

from .assembly import (
    AssemblyParams,
    assemble_instances,
    assemble_panoptic,
    box_iou,
    candidate_filter_by_point,
    match_background_masks,
)
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
    VoteOutcome,
    box_contains_point,
    load_categories,
    tight_bbox,
)
from .errors import (
    CsvSchemaError,
    DimMismatchError,
    EmptyMaskError,
    FoodFuseError,
    FormatError,
    LabelOutOfRangeError,
    LengthMismatchError,
    MissingMaskFileError,
    MissingPairError,
    OutOfBoundsError,
    SchemaError,
)
from .fusion import (
    FusionParams,
    enhance,
    enhance_from_votes,
    filter_confused,
    kept_masks,
    merge_masks,
    sort_for_merge,
    top_k_by_area,
    vote_mask_label,
)
from .mask_io import (
    SceneBundle,
    colorize_labels,
    colorize_segments,
    load_detections,
    load_instance_map,
    load_label_map,
    load_mask_set,
    load_panoptic_map,
    load_scene,
    rle_decode,
    rle_encode,
    save_instance_map,
    save_label_map,
    save_mask_set,
    save_panoptic_map,
    segment_color,
)
from .metrics import (
    ClassMetrics,
    ConfusionMatrix,
    MetricReport,
    aacc,
    confusion_matrix,
    evaluate_dir,
    evaluate_pair,
    macc,
    miou,
    report_from_matrix,
)
from .pipeline import SceneResult, compute_scene, votes_payload
from .prompts import (
    Prompt,
    PromptResult,
    SelectedSegment,
    promptable_segment,
    result_to_json,
    sample_mask_points,
    select_by_box,
    select_by_mask,
    select_by_point,
    select_regular,
)

__version__ = "0.1.0"

__all__ = [
    "AssemblyParams",
    "CategoryTable",
    "ClassMetrics",
    "ConfusionMatrix",
    "CsvSchemaError",
    "DetectionBox",
    "DetectionSet",
    "DimMismatchError",
    "EmptyMaskError",
    "FoodFuseError",
    "FormatError",
    "FusionParams",
    "InstanceMap",
    "LabelMap",
    "LabelOutOfRangeError",
    "LengthMismatchError",
    "MaskRecord",
    "MaskSet",
    "MetricReport",
    "MissingMaskFileError",
    "MissingPairError",
    "OutOfBoundsError",
    "PanopticMap",
    "Prompt",
    "PromptResult",
    "SceneBundle",
    "SceneResult",
    "SchemaError",
    "Segment",
    "SegmentMap",
    "SelectedSegment",
    "VoteOutcome",
    "aacc",
    "assemble_instances",
    "assemble_panoptic",
    "box_contains_point",
    "box_iou",
    "candidate_filter_by_point",
    "colorize_labels",
    "colorize_segments",
    "compute_scene",
    "confusion_matrix",
    "enhance",
    "enhance_from_votes",
    "evaluate_dir",
    "evaluate_pair",
    "filter_confused",
    "kept_masks",
    "load_categories",
    "load_detections",
    "load_instance_map",
    "load_label_map",
    "load_mask_set",
    "load_panoptic_map",
    "load_scene",
    "macc",
    "match_background_masks",
    "merge_masks",
    "miou",
    "promptable_segment",
    "report_from_matrix",
    "result_to_json",
    "rle_decode",
    "rle_encode",
    "sample_mask_points",
    "save_instance_map",
    "save_label_map",
    "save_mask_set",
    "save_panoptic_map",
    "segment_color",
    "select_by_box",
    "select_by_mask",
    "select_by_point",
    "select_regular",
    "sort_for_merge",
    "tight_bbox",
    "top_k_by_area",
    "vote_mask_label",
    "votes_payload",
    "__version__",
]
