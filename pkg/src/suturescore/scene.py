"""Per-image scene geometry: junction line, vessel axis, ordered stitch attributes.

From one image's instance annotations this module reconstructs:

* the junction line direction (first principal component of stitch centers),
* the vessel's rotated box and its axis length along that line,
* per-stitch rotated boxes with orientation, aspect and normalized width,
* inter-stitch gap vectors with bend angles and normalized gap distances.

Boxes are fitted to polygon vertices by default.  When an instance polygon is
a traced mask contour this is exactly the mask -> contour -> rectangle path;
``from_masks=True`` forces that path explicitly by rasterizing each polygon
and re-tracing its border pixels first.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import (
    DegenerateGeometryError,
    GeometryError,
    RotatedBox,
    angle_between_deg,
    min_area_rect,
    perp,
    principal_direction,
    trace_contours,
    unit,
)
from .interchange import (
    STITCH,
    VESSEL,
    AnnotationSet,
    Instance,
    polygon_area,
    rasterize_window,
)


class SceneError(ValueError):
    """Raised when a scene cannot be reconstructed from the annotations."""


class NoVesselError(SceneError):
    """Raised when an image has no usable vessel instance."""


class SceneWarning(UserWarning):
    """Non-fatal scene reconstruction issues (dropped instances, fallbacks)."""


@dataclass(frozen=True)
class StitchGeometry:
    """One stitch's box and derived attributes, indexed along the junction line.

    ``orientation`` is the unit direction of the box edge best aligned with
    the line (signed so its dot with the line is >= 0).  ``height_len`` is
    that edge's full length and ``width_len`` the other edge's full length,
    i.e. the bite extent across the line.  ``alpha_deg`` is the angle between
    ``orientation`` and the line, confined to [0, 45] by the edge choice.
    """

    index: int
    box: RotatedBox
    center: tuple[float, float]
    orientation: tuple[float, float]
    width_len: float
    height_len: float
    aspect: float
    alpha_deg: float
    norm_width: float


@dataclass(frozen=True)
class SceneGeometry:
    """Full geometric reconstruction of one annotated image."""

    image_id: str
    line_dir: tuple[float, float]
    vessel_box: RotatedBox
    vessel_axis_len: float
    stitches: tuple[StitchGeometry, ...]
    gap_vectors: tuple[tuple[float, float], ...]
    beta_deg: tuple[float, ...]
    norm_gaps: tuple[float, ...]
    warnings: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return len(self.stitches)


def assign_axes(box: RotatedBox, line_dir) -> tuple[np.ndarray, float, float]:
    """Split a box's edges into line-aligned and crossing directions.

    Returns ``(orientation, width_len, height_len)`` where ``orientation``
    is the unit direction of the edge with the larger ``|cos|`` against
    ``line_dir`` (re-signed so the dot product is >= 0), ``height_len`` is
    that edge's full length and ``width_len`` the other edge's full length.
    An exact tie (square box at 45 degrees) resolves to ``edge_w`` with a
    warning.
    """
    line = unit(line_dir)
    ew = np.array(box.edge_w)
    eh = np.array(box.edge_h)
    uw = ew / np.linalg.norm(ew)
    uh = eh / np.linalg.norm(eh)
    dw = abs(float(uw @ line))
    dh = abs(float(uh @ line))
    if abs(dw - dh) <= 1e-12:
        warnings.warn(
            "box edges are equally aligned with the line; using edge_w",
            SceneWarning,
        )
        aligned = uw
        height_len, width_len = box.width, box.height
    elif dw > dh:
        aligned = uw
        height_len, width_len = box.width, box.height
    else:
        aligned = uh
        height_len, width_len = box.height, box.width
    if float(aligned @ line) < 0.0:
        aligned = -aligned
    return aligned, width_len, height_len


def order_and_link(
    stitches: list[tuple[RotatedBox, np.ndarray]] | list[RotatedBox],
    line_dir,
    vessel_axis_len: float,
):
    """Sort stitch boxes along the line and derive inter-stitch attributes.

    ``stitches`` may be RotatedBoxes or (box, payload) pairs; ordering is by
    the projection of each center onto ``line_dir`` ascending, ties broken by
    the perpendicular coordinate.  Returns ``(ordered, gap_vectors, beta_deg,
    norm_gaps)``: gap vectors link consecutive centers, ``beta_deg[i]`` is
    the angle between gaps i and i+1, and ``norm_gaps[i]`` is gap i's
    projection onto the line divided by ``vessel_axis_len``.
    """
    line = unit(line_dir)
    side = perp(line)
    items = [(s if isinstance(s, tuple) else (s, None)) for s in stitches]
    if len(items) < 2:
        raise SceneError("order_and_link needs at least 2 stitches")

    def sort_key(item):
        c = np.array(item[0].center)
        return (float(c @ line), float(c @ side))

    ordered = sorted(items, key=sort_key)
    centers = np.array([item[0].center for item in ordered])
    gaps = np.diff(centers, axis=0)
    norm_gaps = tuple(float(g @ line) / vessel_axis_len for g in gaps)
    beta = []
    for i in range(len(gaps) - 1):
        beta.append(angle_between_deg(gaps[i], gaps[i + 1]))
    return (
        [item if item[1] is not None else item[0] for item in ordered],
        tuple((float(g[0]), float(g[1])) for g in gaps),
        tuple(beta),
        norm_gaps,
    )


def _contour_points(inst: Instance) -> np.ndarray:
    """Border pixel centers of the instance's rasterized polygon (mask path)."""
    poly = inst.polygon_array()
    x0 = int(np.floor(poly[:, 0].min())) - 1
    y0 = int(np.floor(poly[:, 1].min())) - 1
    w = int(np.ceil(poly[:, 0].max())) - x0 + 2
    h = int(np.ceil(poly[:, 1].max())) - y0 + 2
    window = rasterize_window(poly, x0, y0, w, h)
    contours = trace_contours(window)
    if not contours:
        return np.empty((0, 2))
    pts = np.vstack(contours)
    return pts + np.array([x0, y0], dtype=float)


def _instance_points(inst: Instance, from_masks: bool) -> np.ndarray:
    if from_masks:
        return _contour_points(inst)
    return inst.polygon_array()


def build_scene(annotations: AnnotationSet, *, from_masks: bool = False) -> SceneGeometry:
    """Reconstruct the scene geometry for one image.

    The vessel is the largest-area vessel instance (others are ignored with a
    warning); an image without a usable vessel raises NoVesselError.  Stitch
    instances whose points are too degenerate to fit a rectangle are dropped
    with a warning.  With fewer than two stitches the scene is still built,
    with empty gap attributes and the vessel's long edge standing in for the
    undefined junction line.
    """
    notes: list[str] = []

    def note(msg: str):
        notes.append(msg)
        warnings.warn(msg, SceneWarning)

    vessels = []
    for inst in annotations.by_class(VESSEL):
        pts = _instance_points(inst, from_masks)
        try:
            box = min_area_rect(pts)
        except GeometryError:
            note("degenerate vessel instance ignored")
            continue
        vessels.append((abs(polygon_area(inst.polygon)), box))
    if not vessels:
        raise NoVesselError(f"{annotations.image_id}: no usable vessel instance")
    vessels.sort(key=lambda v: v[0], reverse=True)
    if len(vessels) > 1:
        note(f"{len(vessels)} vessel instances; keeping the largest by area")
    vessel_box = vessels[0][1]

    boxes = []
    for idx, inst in enumerate(annotations.by_class(STITCH)):
        pts = _instance_points(inst, from_masks)
        try:
            boxes.append(min_area_rect(pts))
        except GeometryError:
            note(f"stitch instance {idx} is degenerate; dropped")

    if len(boxes) >= 2:
        centers = np.array([b.center for b in boxes])
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                line = principal_direction(centers)
            for w in caught:
                note(str(w.message))
        except DegenerateGeometryError:
            line = None
    else:
        line = None
    if line is None:
        note("junction line undefined; falling back to the vessel's long edge")
        line = unit(vessel_box.edge_w)
        if line[0] < 0.0 or (line[0] == 0.0 and line[1] < 0.0):
            line = -line

    _, _, vessel_axis_len = assign_axes(vessel_box, line)

    stitch_geoms = []
    for box in boxes:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            orientation, width_len, height_len = assign_axes(box, line)
        for w in caught:
            note(str(w.message))
        alpha = angle_between_deg(orientation, line)
        stitch_geoms.append(
            (
                box,
                {
                    "orientation": orientation,
                    "width_len": width_len,
                    "height_len": height_len,
                    "aspect": width_len / height_len,
                    "alpha_deg": alpha,
                    "norm_width": width_len / vessel_axis_len,
                },
            )
        )

    if len(stitch_geoms) >= 2:
        ordered, gap_vectors, beta, norm_gaps = order_and_link(
            stitch_geoms, line, vessel_axis_len
        )
    else:
        if len(stitch_geoms) < 2:
            note("fewer than 2 stitches; gap attributes are empty")
        ordered, gap_vectors, beta, norm_gaps = list(stitch_geoms), (), (), ()

    stitches = tuple(
        StitchGeometry(
            index=i,
            box=box,
            center=box.center,
            orientation=(float(attrs["orientation"][0]), float(attrs["orientation"][1])),
            width_len=float(attrs["width_len"]),
            height_len=float(attrs["height_len"]),
            aspect=float(attrs["aspect"]),
            alpha_deg=float(attrs["alpha_deg"]),
            norm_width=float(attrs["norm_width"]),
        )
        for i, (box, attrs) in enumerate(ordered)
    )

    return SceneGeometry(
        image_id=annotations.image_id,
        line_dir=(float(line[0]), float(line[1])),
        vessel_box=vessel_box,
        vessel_axis_len=float(vessel_axis_len),
        stitches=stitches,
        gap_vectors=gap_vectors,
        beta_deg=beta,
        norm_gaps=norm_gaps,
        warnings=tuple(notes),
    )
