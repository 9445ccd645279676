"""Detector evaluation: IoU matching and average precision for boxes and masks.

Predictions are ranked by confidence and matched greedily to unmatched
same-class ground truth in the same image, each taking the highest-IoU
candidate at or above the evaluation threshold (ties broken by ground-truth
file order).  The precision-recall curve of the resulting TP/FP sequence is
summarized by 101-point interpolated average precision; the headline metrics
are AP at IoU 0.5 and the mean over IoU 0.50:0.05:0.95, for axis-aligned
boxes and for rasterized masks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .interchange import AnnotationSet, Instance, rasterize_window

COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * k, 2) for k in range(10))

RECALL_LEVELS = np.linspace(0.0, 1.0, 101)


class EvaluationError(ValueError):
    """Raised for unusable evaluation inputs."""


class EvaluationWarning(UserWarning):
    """Zero-area operands and similar soft conditions."""


def polygon_bbox(polygon) -> tuple[float, float, float, float]:
    """Tight axis-aligned (x0, y0, x1, y1) box of a polygon."""
    pts = np.asarray(polygon, dtype=float)
    return (
        float(pts[:, 0].min()),
        float(pts[:, 1].min()),
        float(pts[:, 0].max()),
        float(pts[:, 1].max()),
    )


def iou_box(a, b) -> float:
    """Intersection over union of two axis-aligned (x0, y0, x1, y1) boxes."""
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    area_a = max(0.0, ax1 - ax0) * max(0.0, ay1 - ay0)
    area_b = max(0.0, bx1 - bx0) * max(0.0, by1 - by0)
    if area_a == 0.0 or area_b == 0.0:
        warnings.warn("IoU of a zero-area box is 0", EvaluationWarning)
        return 0.0
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax1, bx1), min(ay1, by1)
    inter = max(0.0, ix1 - ix0) * max(0.0, iy1 - iy0)
    union = area_a + area_b - inter
    return inter / union if union > 0.0 else 0.0


def iou_mask(mask_a, mask_b) -> float:
    """Intersection over union of two same-shape boolean pixel masks."""
    a = np.asarray(getattr(mask_a, "pixels", mask_a), dtype=bool)
    b = np.asarray(getattr(mask_b, "pixels", mask_b), dtype=bool)
    if a.shape != b.shape:
        raise EvaluationError(f"mask shapes differ: {a.shape} vs {b.shape}")
    count_a = int(a.sum())
    count_b = int(b.sum())
    if count_a == 0 or count_b == 0:
        warnings.warn("IoU with an empty mask is 0", EvaluationWarning)
        return 0.0
    inter = int((a & b).sum())
    union = count_a + count_b - inter
    return inter / union if union else 0.0


class _RasterInstance:
    """Lazily rasterized instance in a local window, for pairwise mask IoU."""

    def __init__(self, inst: Instance):
        poly = inst.polygon_array()
        self.x0 = int(np.floor(poly[:, 0].min()))
        self.y0 = int(np.floor(poly[:, 1].min()))
        w = int(np.ceil(poly[:, 0].max())) - self.x0 + 1
        h = int(np.ceil(poly[:, 1].max())) - self.y0 + 1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            self.pixels = rasterize_window(poly, self.x0, self.y0, w, h)
        self.count = int(self.pixels.sum())

    def iou(self, other: "_RasterInstance") -> float:
        if self.count == 0 or other.count == 0:
            return 0.0
        x0 = max(self.x0, other.x0)
        y0 = max(self.y0, other.y0)
        x1 = min(self.x0 + self.pixels.shape[1], other.x0 + other.pixels.shape[1])
        y1 = min(self.y0 + self.pixels.shape[0], other.y0 + other.pixels.shape[0])
        if x1 <= x0 or y1 <= y0:
            return 0.0
        a = self.pixels[y0 - self.y0 : y1 - self.y0, x0 - self.x0 : x1 - self.x0]
        b = other.pixels[y0 - other.y0 : y1 - other.y0, x0 - other.x0 : x1 - other.x0]
        inter = int((a & b).sum())
        union = self.count + other.count - inter
        return inter / union if union else 0.0


@dataclass(frozen=True)
class MatchResult:
    """Greedy matching outcome for one image and class at one IoU threshold.

    Entries follow the predictions in descending-confidence order; each is
    the matched ground-truth index (file order) or None, with the achieved
    IoU.  Every ground truth is matched at most once.
    """

    matched_gt: tuple[int | None, ...]
    ious: tuple[float, ...]


def match_greedy(iou_matrix: np.ndarray, threshold: float) -> MatchResult:
    """Match predictions (rows, already confidence-sorted) to ground truth.

    Each prediction takes the unmatched ground truth of highest IoU at or
    above the threshold; exact ties keep the earliest (file-order) ground
    truth.
    """
    taken: set[int] = set()
    matched: list[int | None] = []
    achieved: list[float] = []
    n_gt = iou_matrix.shape[1]
    for row in iou_matrix:
        best_gt, best_iou = None, -1.0
        for g in range(n_gt):
            if g in taken:
                continue
            if row[g] >= threshold and row[g] > best_iou:
                best_gt, best_iou = g, row[g]
        if best_gt is not None:
            taken.add(best_gt)
            matched.append(best_gt)
            achieved.append(float(best_iou))
        else:
            matched.append(None)
            achieved.append(float(row.max()) if n_gt else 0.0)
    return MatchResult(matched_gt=tuple(matched), ious=tuple(achieved))


def average_precision(tp_sequence, n_gt: int) -> float:
    """101-point interpolated AP from a confidence-ordered TP/FP sequence."""
    if n_gt == 0:
        raise EvaluationError("average_precision needs at least one ground truth")
    tp = np.asarray(tp_sequence, dtype=bool)
    if len(tp) == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(~tp)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    # Precision envelope: best precision achievable at recall >= r.
    ap = 0.0
    for r in RECALL_LEVELS:
        mask = recall >= r - 1e-12
        ap += float(precision[mask].max()) if mask.any() else 0.0
    return ap / len(RECALL_LEVELS)


@dataclass(frozen=True)
class ClassAP:
    """Average-precision summary for one class (mask entries None if skipped)."""

    ap50_box: float
    ap_box: float
    ap50_mask: float | None
    ap_mask: float | None


@dataclass(frozen=True)
class APReport:
    """Per-class AP metrics; classes without ground truth are absent."""

    classes: dict[str, ClassAP]
    iou_thresholds: tuple[float, ...]

    def to_dict(self) -> dict:
        out: dict = {"iou_thresholds": list(self.iou_thresholds), "classes": {}}
        for label, c in sorted(self.classes.items()):
            entry = {"ap50_box": c.ap50_box, "ap_box": c.ap_box}
            if c.ap50_mask is not None:
                entry["ap50_mask"] = c.ap50_mask
                entry["ap_mask"] = c.ap_mask
            out["classes"][label] = entry
        return out


def _group_by_image(sets: list[AnnotationSet], kind: str) -> dict[str, AnnotationSet]:
    grouped: dict[str, AnnotationSet] = {}
    for ann in sets:
        if ann.image_id in grouped:
            raise EvaluationError(f"duplicate {kind} annotations for {ann.image_id!r}")
        grouped[ann.image_id] = ann
    return grouped


def evaluate(
    predictions: list[AnnotationSet],
    ground_truth: list[AnnotationSet],
    iou_thresholds: tuple[float, ...] = COCO_IOU_THRESHOLDS,
    *,
    with_masks: bool = True,
) -> APReport:
    """Score predicted annotation sets against ground truth.

    Every prediction must carry a confidence and belong to an image present
    in the ground truth.  AP at 0.5 and the mean over ``iou_thresholds`` are
    reported per class, for boxes and (unless disabled) masks.
    """
    preds = _group_by_image(predictions, "prediction")
    gts = _group_by_image(ground_truth, "ground-truth")
    unknown = sorted(set(preds) - set(gts))
    if unknown:
        raise EvaluationError(
            "predictions for images missing from ground truth: " + ", ".join(unknown)
        )

    classes = sorted({i.class_label for ann in gts.values() for i in ann.instances})
    gt_images = list(gts)
    image_pos = {image_id: k for k, image_id in enumerate(gt_images)}

    report: dict[str, ClassAP] = {}
    for label in classes:
        n_gt = sum(
            1 for ann in gts.values() for i in ann.instances if i.class_label == label
        )
        if n_gt == 0:
            continue

        # Per image: class predictions in descending-confidence order (file
        # order on ties), the order greedy matching consumes them in.
        per_image: dict[str, list[tuple[float, int]]] = {}
        for image_id in gt_images:
            ann = preds.get(image_id)
            if ann is None:
                continue
            rows = []
            for idx, inst in enumerate(ann.instances):
                if inst.class_label != label:
                    continue
                if inst.confidence is None:
                    raise EvaluationError(
                        f"{image_id}: prediction instance {idx} has no confidence"
                    )
                rows.append((inst.confidence, idx))
            if rows:
                rows.sort(key=lambda r: (-r[0], r[1]))
                per_image[image_id] = rows

        geometries = ["box", "mask"] if with_masks else ["box"]
        iou_cache: dict[str, dict[str, np.ndarray]] = {g: {} for g in geometries}
        for image_id, rows in per_image.items():
            gt_insts = [i for i in gts[image_id].instances if i.class_label == label]
            pr_insts = [preds[image_id].instances[idx] for _, idx in rows]
            box_m = np.zeros((len(pr_insts), len(gt_insts)))
            for r, p in enumerate(pr_insts):
                pb = polygon_bbox(p.polygon)
                for c, g in enumerate(gt_insts):
                    box_m[r, c] = iou_box(pb, polygon_bbox(g.polygon))
            iou_cache["box"][image_id] = box_m
            if with_masks:
                p_rast = [_RasterInstance(p) for p in pr_insts]
                g_rast = [_RasterInstance(g) for g in gt_insts]
                mask_m = np.zeros((len(pr_insts), len(gt_insts)))
                for r, pr_r in enumerate(p_rast):
                    for c, gt_r in enumerate(g_rast):
                        mask_m[r, c] = pr_r.iou(gt_r)
                iou_cache["mask"][image_id] = mask_m

        # Global confidence rank for the pooled TP/FP sequence.
        ranked = sorted(
            (
                (-conf, image_pos[image_id], idx, image_id, row_pos)
                for image_id, rows in per_image.items()
                for row_pos, (conf, idx) in enumerate(rows)
            )
        )

        aps: dict[str, dict[float, float]] = {g: {} for g in geometries}
        for geometry in geometries:
            for threshold in iou_thresholds:
                hits: dict[str, MatchResult] = {
                    image_id: match_greedy(matrix, threshold)
                    for image_id, matrix in iou_cache[geometry].items()
                }
                tp_seq = [
                    hits[image_id].matched_gt[row_pos] is not None
                    for _, _, _, image_id, row_pos in ranked
                ]
                aps[geometry][threshold] = average_precision(tp_seq, n_gt)

        def _mean(geometry: str) -> float:
            return float(np.mean([aps[geometry][t] for t in iou_thresholds]))

        report[label] = ClassAP(
            ap50_box=aps["box"].get(0.5, aps["box"][iou_thresholds[0]]),
            ap_box=_mean("box"),
            ap50_mask=aps["mask"].get(0.5, aps["mask"][iou_thresholds[0]]) if with_masks else None,
            ap_mask=_mean("mask") if with_masks else None,
        )

    return APReport(classes=report, iou_thresholds=tuple(iou_thresholds))
