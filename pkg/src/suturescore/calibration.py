"""Threshold calibration from rater scores, plus rater-reliability measures.

Raters report only a per-image error count, not which stitch is at fault.
Calibration treats that as a multiple-instance labeling problem: for each
image the ``s_h`` attribute values most likely to satisfy the error
condition are labeled abnormal (for ``s_h = 0`` the single most likely value
is labeled normal), the labeled values are pooled across images, and the
detection threshold is the ROC sweep candidate maximizing Youden's
J = TPR - FPR.

E4 and E5 each need two thresholds, only one of which the ROC sweep can
identify, so the other (the lower width / lower distance bound) is found by
grid search: at each grid value the instances already explained by it (and,
for E4, by missing stitches) consume the rater's budget before the residual
budget labels the remaining pool.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .scene import SceneGeometry

ERROR_TYPES = ("E1", "E2", "E3", "E4", "E5")

GRID_MAX = 0.125

_SINGLE_ATTR = {"E1": "beta_deg", "E2": "alpha_deg", "E3": "norm_width"}


class CalibrationError(ValueError):
    """Raised when calibration inputs are unusable."""


class CalibrationWarning(UserWarning):
    """Degenerate pools, exhausted budgets, and similar soft failures."""


@dataclass(frozen=True)
class LabeledInstance:
    """One pooled attribute value with its inferred abnormality label."""

    value: float
    label: bool

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise CalibrationError(f"non-finite attribute value {self.value}")


@dataclass(frozen=True)
class RocCurve:
    """ROC sweep over candidate thresholds for one direction.

    ``direction`` is "greater" when values above the threshold are flagged,
    "less" when values below are.  Candidates are midpoints between
    consecutive distinct values plus one sentinel beyond each end of the
    data, so TPR and FPR are monotone along the sweep.
    """

    thresholds: tuple[float, ...]
    tpr: tuple[float, ...]
    fpr: tuple[float, ...]
    flagged: tuple[int, ...]
    direction: str


def label_instances(values, s_h: int, direction: str) -> list[LabeledInstance]:
    """Infer per-value labels from an image-level error count.

    With ``s_h > 0`` the ``s_h`` values most extreme in ``direction`` are
    labeled abnormal; the rest of the image contributes nothing.  With
    ``s_h = 0`` the single most extreme value is labeled normal.  A count
    exceeding the number of values labels everything abnormal with a warning.
    """
    if direction not in ("greater", "less"):
        raise CalibrationError(f"unknown direction {direction!r}")
    if s_h < 0:
        raise CalibrationError(f"negative score {s_h}")
    vals = [float(v) for v in values]
    if not vals:
        raise CalibrationError("label_instances needs a nonempty value list")
    order = sorted(range(len(vals)), key=lambda i: (vals[i], i))
    if direction == "greater":
        order = order[::-1]
    if s_h == 0:
        return [LabeledInstance(value=vals[order[0]], label=False)]
    if s_h > len(vals):
        warnings.warn(
            f"score {s_h} exceeds {len(vals)} available values; labeling all abnormal",
            CalibrationWarning,
        )
        s_h = len(vals)
    return [LabeledInstance(value=vals[i], label=True) for i in order[:s_h]]


def roc_curve(instances: list[LabeledInstance], direction: str) -> RocCurve:
    """ROC points over midpoint candidates (plus beyond-range sentinels)."""
    if direction not in ("greater", "less"):
        raise CalibrationError(f"unknown direction {direction!r}")
    if not instances:
        raise CalibrationError("roc_curve needs at least one labeled instance")
    values = np.array([inst.value for inst in instances])
    labels = np.array([inst.label for inst in instances])
    distinct = np.unique(values)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    candidates = np.concatenate([[distinct[0] - 1.0], mids, [distinct[-1] + 1.0]])
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos

    tpr, fpr, flagged = [], [], []
    for c in candidates:
        hit = values > c if direction == "greater" else values < c
        tp = int((hit & labels).sum())
        fp = int((hit & ~labels).sum())
        tpr.append(tp / n_pos if n_pos else 0.0)
        fpr.append(fp / n_neg if n_neg else 0.0)
        flagged.append(int(hit.sum()))
    return RocCurve(
        thresholds=tuple(float(c) for c in candidates),
        tpr=tuple(tpr),
        fpr=tuple(fpr),
        flagged=tuple(flagged),
        direction=direction,
    )


def youden_threshold(instances: list[LabeledInstance], direction: str) -> tuple[float, float]:
    """Threshold maximizing J = TPR - FPR over the ROC candidates.

    Ties resolve toward the candidate flagging fewer instances.  Single-class
    input is degenerate: a warning is attached and the returned threshold
    lies beyond the data range (flagging everything for all-abnormal input,
    nothing for all-normal input), with J = 0.
    """
    curve = roc_curve(instances, direction)
    labels = [inst.label for inst in instances]
    if all(labels) or not any(labels):
        warnings.warn(
            "single-class pool; threshold is degenerate", CalibrationWarning
        )
        want_all = all(labels)
        best = None
        for c, f in zip(curve.thresholds, curve.flagged):
            target = len(instances) if want_all else 0
            if f == target:
                best = c
                if want_all:
                    break  # first (most permissive) candidate flagging everything
        return float(best), 0.0
    best_idx = 0
    best_key = None
    for i, (c, tp, fp, f) in enumerate(
        zip(curve.thresholds, curve.tpr, curve.fpr, curve.flagged)
    ):
        j = tp - fp
        key = (-j, f)
        if best_key is None or key < best_key:
            best_key = key
            best_idx = i
    j_best = curve.tpr[best_idx] - curve.fpr[best_idx]
    return float(curve.thresholds[best_idx]), float(j_best)


@dataclass(frozen=True)
class CalibrationImage:
    """One image's attribute vectors plus its rater error counts."""

    image_id: str
    alpha_deg: tuple[float, ...]
    beta_deg: tuple[float, ...]
    aspect: tuple[float, ...]
    norm_width: tuple[float, ...]
    norm_gaps: tuple[float, ...]
    n: int
    expected_stitches: int
    scores: tuple[int, int, int, int, int]

    def __post_init__(self):
        if any(s < 0 for s in self.scores):
            raise CalibrationError(f"{self.image_id}: negative score")
        if len(self.alpha_deg) != self.n or len(self.aspect) != self.n:
            raise CalibrationError(f"{self.image_id}: per-stitch attribute length != n")

    def score(self, error_type: str) -> int:
        return self.scores[ERROR_TYPES.index(error_type)]


@dataclass(frozen=True)
class CalibrationDataset:
    """Ordered collection of calibration images."""

    images: tuple[CalibrationImage, ...]

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self):
        return iter(self.images)

    @classmethod
    def from_scenes(
        cls,
        scenes: list[SceneGeometry],
        scores: dict[str, tuple[int, ...]],
        expected_stitches: int = 8,
    ) -> "CalibrationDataset":
        """Pair reconstructed scenes with their per-image rater counts."""
        missing = [s.image_id for s in scenes if s.image_id not in scores]
        if missing:
            raise CalibrationError(
                "scores missing for images: " + ", ".join(sorted(missing))
            )
        images = []
        for scene in scenes:
            counts = tuple(int(c) for c in scores[scene.image_id])
            images.append(
                CalibrationImage(
                    image_id=scene.image_id,
                    alpha_deg=tuple(s.alpha_deg for s in scene.stitches),
                    beta_deg=scene.beta_deg,
                    aspect=tuple(s.aspect for s in scene.stitches),
                    norm_width=tuple(s.norm_width for s in scene.stitches),
                    norm_gaps=scene.norm_gaps,
                    n=scene.n,
                    expected_stitches=expected_stitches,
                    scores=counts,
                )
            )
        return cls(images=tuple(images))


def pooled_instances(dataset: CalibrationDataset, error_type: str) -> list[LabeledInstance]:
    """Pool labeled instances for a single-threshold error type (E1, E2, E3)."""
    if error_type not in _SINGLE_ATTR:
        raise CalibrationError(f"{error_type} is not a single-threshold error type")
    attr = _SINGLE_ATTR[error_type]
    pool: list[LabeledInstance] = []
    for image in dataset:
        values = getattr(image, attr)
        if not values:
            continue
        pool.extend(label_instances(values, image.score(error_type), "greater"))
    return pool


def pooled_instances_e4(dataset: CalibrationDataset, width_cut: float) -> list[LabeledInstance]:
    """Pool aspect-ratio labels for E4 given a candidate lower width bound.

    Per image the rater's count is consumed first by missing stitches, then
    by stitches narrower than ``width_cut``; the residual labels the
    lowest-aspect stitches abnormal.
    """
    pool: list[LabeledInstance] = []
    for image in dataset:
        if not image.aspect:
            continue
        deficit = max(0, image.expected_stitches - image.n)
        consumed = sum(1 for w in image.norm_width if w < width_cut)
        residual = max(0, image.score("E4") - deficit - consumed)
        pool.extend(label_instances(image.aspect, residual, "less"))
    return pool


def pooled_instances_e5(dataset: CalibrationDataset, low_cut: float) -> list[LabeledInstance]:
    """Pool gap-distance labels for E5 given a candidate lower distance bound."""
    pool: list[LabeledInstance] = []
    for image in dataset:
        if not image.norm_gaps:
            continue
        consumed = sum(1 for g in image.norm_gaps if g < low_cut)
        residual = max(0, image.score("E5") - consumed)
        pool.extend(label_instances(image.norm_gaps, residual, "greater"))
    return pool


def calibrate_single(dataset: CalibrationDataset, error_type: str) -> float:
    """Calibrate the threshold for E1, E2 or E3 from pooled labels."""
    if len(dataset) < 2:
        raise CalibrationError("calibration needs at least 2 images")
    pool = pooled_instances(dataset, error_type)
    if not pool:
        raise CalibrationError(f"{error_type}: empty calibration pool")
    threshold, _ = youden_threshold(pool, "greater")
    return threshold


def calibrate_pair(
    dataset: CalibrationDataset,
    error_type: str,
    grid_step: float = 0.005,
) -> tuple[float, float]:
    """Calibrate an (lower bound, ROC threshold) pair for E4 or E5.

    Sweeps the lower bound over a grid on [0, 0.125]; at each grid value the
    residual pool's Youden threshold is computed, and the pair with the
    highest pooled J wins (ties toward the smaller grid value).  Returns
    ``(l_w_minus, a_star)`` for E4 and ``(l_d_minus, l_d_plus)`` for E5.
    """
    if error_type not in ("E4", "E5"):
        raise CalibrationError(f"{error_type} is not a paired-threshold error type")
    if len(dataset) < 2:
        raise CalibrationError("calibration needs at least 2 images")
    if grid_step <= 0:
        raise CalibrationError("grid_step must be positive")
    grid = np.arange(0.0, GRID_MAX + grid_step / 2.0, grid_step)

    best = None
    any_pool = False
    for cut in grid:
        if error_type == "E4":
            pool = pooled_instances_e4(dataset, float(cut))
            direction = "less"
        else:
            pool = pooled_instances_e5(dataset, float(cut))
            direction = "greater"
        if not pool:
            continue
        any_pool = True
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CalibrationWarning)
            threshold, j = youden_threshold(pool, direction)
        if best is None or j > best[0]:
            best = (j, float(cut), threshold)
    if not any_pool:
        raise CalibrationError(f"{error_type}: empty pools at every grid value")
    _, cut, threshold = best
    return cut, threshold


def true_accuracy(test, gt) -> float:
    """Exact-count agreement for one error type over aligned per-image counts.

    A photo counts as a true positive when both counts are equal and
    positive, as a true negative when both are zero; the accuracy is
    (TP + TN) / total.
    """
    test = [int(x) for x in test]
    gt = [int(x) for x in gt]
    if len(test) != len(gt):
        raise CalibrationError(f"count lists differ in length: {len(test)} vs {len(gt)}")
    if not test:
        raise CalibrationError("empty count lists")
    hits = sum(1 for a, b in zip(test, gt) if (a == b and a > 0) or (a == 0 and b == 0))
    return hits / len(test)


def binary_accuracy(test, gt) -> float:
    """Presence agreement: counts are binarized before scoring."""
    return true_accuracy([int(x > 0) for x in test], [int(x > 0) for x in gt])


@dataclass(frozen=True)
class ErrorAgreement:
    """Reliability of one error type between two score tables."""

    true_accuracy: float
    binary_accuracy: float
    agreeing: int
    conflicting: int

    def __post_init__(self):
        if self.binary_accuracy < self.true_accuracy:
            raise CalibrationError("binary accuracy cannot be below true accuracy")


@dataclass(frozen=True)
class AccuracyReport:
    """Per-error-type reliability between a test and a reference score table."""

    per_error: dict[str, ErrorAgreement]

    def to_dict(self) -> dict:
        return {
            etype: {
                "true_accuracy": agg.true_accuracy,
                "binary_accuracy": agg.binary_accuracy,
                "agreeing": agg.agreeing,
                "conflicting": agg.conflicting,
            }
            for etype, agg in self.per_error.items()
        }


def _check_same_images(test: dict, gt: dict):
    only_test = sorted(set(test) - set(gt))
    only_gt = sorted(set(gt) - set(test))
    if only_test or only_gt:
        parts = []
        if only_test:
            parts.append("only in test: " + ", ".join(only_test))
        if only_gt:
            parts.append("only in reference: " + ", ".join(only_gt))
        raise CalibrationError("image sets differ; " + "; ".join(parts))


def reliability_report(
    test: dict[str, tuple[int, ...]],
    gt: dict[str, tuple[int, ...]],
) -> AccuracyReport:
    """Compare two per-image count tables across all five error types."""
    _check_same_images(test, gt)
    images = list(test)
    per_error = {}
    for k, etype in enumerate(ERROR_TYPES):
        t_counts = [test[i][k] for i in images]
        g_counts = [gt[i][k] for i in images]
        agreeing = sum(1 for a, b in zip(t_counts, g_counts) if a == b)
        per_error[etype] = ErrorAgreement(
            true_accuracy=true_accuracy(t_counts, g_counts),
            binary_accuracy=binary_accuracy(t_counts, g_counts),
            agreeing=agreeing,
            conflicting=len(images) - agreeing,
        )
    return AccuracyReport(per_error=per_error)


def clean_dataset(
    scores_t1: dict[str, tuple[int, ...]],
    scores_t2: dict[str, tuple[int, ...]],
    error_type: str,
) -> tuple[str, ...]:
    """Image ids whose two trials agree on one error type's count.

    Images with conflicting counts are excluded; a fully conflicting pair of
    tables yields an empty selection with a warning.
    """
    _check_same_images(scores_t1, scores_t2)
    k = ERROR_TYPES.index(error_type)
    retained = tuple(
        image_id for image_id in scores_t1 if scores_t1[image_id][k] == scores_t2[image_id][k]
    )
    if not retained:
        warnings.warn(
            f"{error_type}: all images conflict between the two trials",
            CalibrationWarning,
        )
    return retained
