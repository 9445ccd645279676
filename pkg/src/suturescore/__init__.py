"""Geometric assessment of microsurgical anastomosis stitch layouts.

The pipeline reconstructs per-stitch geometry from instance annotations,
counts five layout error types against calibrated thresholds, calibrates
those thresholds from expert scores, and evaluates detector quality with
average-precision metrics.  A seeded synthetic-scene generator provides
exact ground truth for end-to-end verification.
"""

from .calibration import (
    AccuracyReport,
    CalibrationDataset,
    CalibrationImage,
    LabeledInstance,
    RocCurve,
    binary_accuracy,
    calibrate_pair,
    calibrate_single,
    clean_dataset,
    label_instances,
    reliability_report,
    roc_curve,
    true_accuracy,
    youden_threshold,
)
from .detection_eval import (
    APReport,
    MatchResult,
    evaluate,
    iou_box,
    iou_mask,
    match_greedy,
)
from .errors import (
    DEFAULT_THRESHOLDS,
    DetectionConfig,
    ErrorReport,
    Thresholds,
    detect_all,
    load_thresholds,
    serialize_thresholds,
)
from .geometry import (
    RotatedBox,
    convex_hull,
    min_area_rect,
    principal_direction,
    trace_contours,
)
from .interchange import (
    AnnotationSet,
    BinaryMask,
    Instance,
    RaterScoreTable,
    parse_annotation_file,
    parse_scores,
    rasterize,
    serialize_annotation_set,
    serialize_scores,
)
from .overlay import render_overlay
from .scene import (
    SceneGeometry,
    StitchGeometry,
    assign_axes,
    build_scene,
    order_and_link,
)
from .synth import (
    GroundTruthErrors,
    Injection,
    SceneSpec,
    generate_scene,
    load_scene_spec,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "AnnotationSet",
    "APReport",
    "BinaryMask",
    "CalibrationDataset",
    "CalibrationImage",
    "DEFAULT_THRESHOLDS",
    "DetectionConfig",
    "ErrorReport",
    "GroundTruthErrors",
    "Injection",
    "Instance",
    "LabeledInstance",
    "MatchResult",
    "RaterScoreTable",
    "RocCurve",
    "RotatedBox",
    "SceneGeometry",
    "SceneSpec",
    "StitchGeometry",
    "Thresholds",
    "assign_axes",
    "binary_accuracy",
    "build_scene",
    "calibrate_pair",
    "calibrate_single",
    "clean_dataset",
    "convex_hull",
    "detect_all",
    "evaluate",
    "generate_scene",
    "iou_box",
    "iou_mask",
    "label_instances",
    "load_scene_spec",
    "load_thresholds",
    "match_greedy",
    "min_area_rect",
    "order_and_link",
    "parse_annotation_file",
    "parse_scores",
    "principal_direction",
    "rasterize",
    "reliability_report",
    "render_overlay",
    "roc_curve",
    "serialize_annotation_set",
    "serialize_scores",
    "serialize_thresholds",
    "trace_contours",
    "true_accuracy",
    "youden_threshold",
]
