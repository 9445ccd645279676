"""Inference bridge: run an instance-segmentation model, export annotation files.

Any model exposing per-instance masks can drive the export.  A model is an
object with a ``detect(image) -> list[Detection]`` method taking an
``(H, W, 3)`` uint8 RGB array; ``label`` is the model's raw class name or
id, ``score`` its confidence, ``mask`` an ``(H, W)`` float array of mask
probabilities.

Exported files follow the annotation interchange schema: one JSON document
per image with ``image_id``, ``width``, ``height`` and an ``instances``
array of ``{"class", "polygon", "confidence"}`` entries.  Instances are kept
only above the class-score threshold, masks are binarized at the mask
threshold, and each instance's polygon is the outer contour of its largest
connected mask component (vertices at pixel centers).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

CLASS_NAMES = ("stitch", "vessel")


class ModelLoadError(RuntimeError):
    """Raised when a model identifier cannot be resolved or loaded."""


class AdapterWarning(UserWarning):
    """Dropped detections and other non-fatal export conditions."""


@dataclass(frozen=True)
class Detection:
    """One raw model detection."""

    label: str
    score: float
    mask: np.ndarray  # (H, W) float probabilities


@dataclass(frozen=True)
class AdapterConfig:
    """Export configuration.

    ``class_map`` maps the model's raw labels (names or stringified ids) to
    the annotation classes ``stitch`` / ``vessel``; detections with unmapped
    labels are dropped with a warning.
    """

    model: str
    class_threshold: float = 0.5
    mask_threshold: float = 0.5
    class_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name, value in (
            ("class_threshold", self.class_threshold),
            ("mask_threshold", self.mask_threshold),
        ):
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        for raw, cls in self.class_map.items():
            if cls not in CLASS_NAMES:
                raise ValueError(f"class_map[{raw!r}] = {cls!r}; expected one of {CLASS_NAMES}")


class TorchvisionModel:
    """Wrapper around a torchvision detection model with mask output."""

    def __init__(self, name: str):
        try:
            import torch
            import torchvision
        except ImportError as exc:
            raise ModelLoadError(f"torchvision backend unavailable: {exc}") from exc
        factory = getattr(torchvision.models.detection, name, None)
        if factory is None:
            raise ModelLoadError(f"unknown torchvision detection model {name!r}")
        try:
            self._model = factory(weights="DEFAULT")
        except Exception as exc:  # weight download or instantiation failure
            raise ModelLoadError(f"cannot load weights for {name!r}: {exc}") from exc
        self._model.eval()
        self._torch = torch

    def detect(self, image: np.ndarray) -> list[Detection]:
        torch = self._torch
        tensor = torch.from_numpy(image.astype(np.float32) / 255.0).permute(2, 0, 1)
        with torch.no_grad():
            (output,) = self._model([tensor])
        detections = []
        masks = output.get("masks")
        if masks is None:
            raise ModelLoadError("model produced no masks; a mask head is required")
        for label, score, mask in zip(output["labels"], output["scores"], masks):
            detections.append(
                Detection(
                    label=str(int(label)),
                    score=float(score),
                    mask=mask[0].cpu().numpy(),
                )
            )
        return detections


def load_model(identifier: str):
    """Resolve a model identifier of the form ``torchvision:<name>``."""
    scheme, _, name = identifier.partition(":")
    if scheme == "torchvision" and name:
        return TorchvisionModel(name)
    raise ModelLoadError(
        f"unsupported model identifier {identifier!r}; expected 'torchvision:<name>'"
    )


def mask_to_polygon(mask: np.ndarray, threshold: float) -> list[tuple[float, float]] | None:
    """Outer contour of the largest component of a binarized mask.

    Returns vertices at pixel centers, or None when nothing usable remains
    after binarization.
    """
    binary = (np.asarray(mask, dtype=float) >= threshold).astype(np.uint8)
    if not binary.any():
        return None
    contours, _ = cv2.findContours(binary, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    if not contours:
        return None
    contour = max(contours, key=cv2.contourArea)
    points = contour.reshape(-1, 2).astype(float) + 0.5  # pixel centers
    if len(points) < 3 or cv2.contourArea(contour) <= 0:
        return None
    return [(float(x), float(y)) for x, y in points]


def export_image(
    image: np.ndarray,
    image_id: str,
    detections: list[Detection],
    config: AdapterConfig,
) -> dict:
    """Convert raw detections for one image into an annotation document."""
    height, width = image.shape[:2]
    instances = []
    for det in detections:
        if det.score <= config.class_threshold:
            continue
        mapped = config.class_map.get(det.label)
        if mapped is None:
            warnings.warn(
                f"{image_id}: dropping detection with unmapped label {det.label!r}",
                AdapterWarning,
            )
            continue
        polygon = mask_to_polygon(det.mask, config.mask_threshold)
        if polygon is None:
            warnings.warn(
                f"{image_id}: dropping {mapped} detection with an empty mask",
                AdapterWarning,
            )
            continue
        instances.append(
            {
                "class": mapped,
                "polygon": [[x, y] for x, y in polygon],
                "confidence": det.score,
            }
        )
    return {
        "image_id": image_id,
        "width": int(width),
        "height": int(height),
        "instances": instances,
    }


def infer_and_export(
    image_paths: list[str | Path],
    config: AdapterConfig,
    out_dir: str | Path,
    model=None,
) -> list[Path]:
    """Run inference on each image and write one annotation file per image.

    ``model`` defaults to resolving ``config.model``; injecting an object
    with the same ``detect`` protocol supports offline backends and tests.
    """
    if model is None:
        model = load_model(config.model)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in image_paths:
        path = Path(path)
        image = np.asarray(Image.open(path).convert("RGB"))
        doc = export_image(image, path.stem, model.detect(image), config)
        out_path = out_dir / f"{path.stem}.json"
        out_path.write_text(json.dumps(doc, indent=2) + "\n")
        written.append(out_path)
    return written
