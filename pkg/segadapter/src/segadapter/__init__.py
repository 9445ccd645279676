"""Instance-segmentation inference bridge emitting stitch/vessel annotations."""

from .adapter import (
    AdapterConfig,
    AdapterWarning,
    Detection,
    ModelLoadError,
    export_image,
    infer_and_export,
    load_model,
    mask_to_polygon,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterWarning",
    "Detection",
    "ModelLoadError",
    "export_image",
    "infer_and_export",
    "load_model",
    "mask_to_polygon",
]
