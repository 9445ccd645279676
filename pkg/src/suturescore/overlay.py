"""SVG feedback overlays: per-stitch geometry in green, flagged attributes in red.

Every flag produces exactly one red element, so the number of red elements
in a rendered overlay equals the total of per-stitch and per-gap flags
(missing stitches cannot be drawn and contribute none):

* bend flag (E1): red polyline through the three centers around the bend,
* oblique flag (E2): red outline of the stitch box,
* wide-bite flag (E3): red segment along the stitch's width axis,
* shallow flags (E4): red diagonal cross (aspect) or red width segment
  (narrow bite),
* spacing flag (E5): red segment joining the two gap centers.

Output is deterministic: fixed element order and fixed coordinate formatting.
"""

from __future__ import annotations

import numpy as np

from .errors import ErrorReport
from .scene import SceneGeometry, StitchGeometry

GREEN = "#2e7d32"
RED = "#c62828"


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _points(points) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)


def _polygon(points, color: str, cls: str, stroke_width: float) -> str:
    return (
        f'<polygon class="{cls}" points="{_points(points)}" fill="none" '
        f'stroke="{color}" stroke-width="{_fmt(stroke_width)}" />'
    )


def _polyline(points, color: str, cls: str, stroke_width: float) -> str:
    return (
        f'<polyline class="{cls}" points="{_points(points)}" fill="none" '
        f'stroke="{color}" stroke-width="{_fmt(stroke_width)}" />'
    )


def _line(p, q, color: str, cls: str, stroke_width: float) -> str:
    return (
        f'<line class="{cls}" x1="{_fmt(p[0])}" y1="{_fmt(p[1])}" '
        f'x2="{_fmt(q[0])}" y2="{_fmt(q[1])}" '
        f'stroke="{color}" stroke-width="{_fmt(stroke_width)}" />'
    )


def _width_axis(stitch: StitchGeometry) -> tuple[np.ndarray, np.ndarray]:
    center = np.array(stitch.center)
    across = np.array([-stitch.orientation[1], stitch.orientation[0]])
    half = across * stitch.width_len / 2.0
    return center - half, center + half


def render_overlay(
    scene: SceneGeometry,
    report: ErrorReport,
    width: int,
    height: int,
) -> str:
    """Render one image's assessment as a standalone SVG document."""
    stroke = max(1.0, 0.002 * max(width, height))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]

    centers = [np.array(s.center) for s in scene.stitches]
    line = np.array(scene.line_dir)

    # Regular geometry in green: junction line, vessel box, stitch boxes, gaps.
    if centers:
        mid = np.mean(centers, axis=0)
        span = max(width, height)
        parts.append(
            _line(mid - line * span, mid + line * span, GREEN, "junction-line", stroke)
        )
    parts.append(_polygon(scene.vessel_box.corners(), GREEN, "vessel", stroke))
    for stitch in scene.stitches:
        parts.append(
            _polygon(stitch.box.corners(), GREEN, f"stitch stitch-{stitch.index}", stroke)
        )
    for i in range(len(centers) - 1):
        parts.append(_line(centers[i], centers[i + 1], GREEN, f"gap gap-{i}", stroke))

    # Flagged attributes in red, one element per flag.
    red_stroke = stroke * 1.5
    for i, flag in enumerate(report.e1_flags):
        if flag:
            pts = [centers[i], centers[i + 1], centers[i + 2]]
            parts.append(_polyline(pts, RED, f"error e1 gap-{i}", red_stroke))
    for i, flag in enumerate(report.e2_flags):
        if flag:
            parts.append(
                _polygon(scene.stitches[i].box.corners(), RED, f"error e2 stitch-{i}", red_stroke)
            )
    for i, flag in enumerate(report.e3_flags):
        if flag:
            p, q = _width_axis(scene.stitches[i])
            parts.append(_line(p, q, RED, f"error e3 stitch-{i}", red_stroke))
    for i, flag in enumerate(report.e4_aspect_flags):
        if flag:
            corners = scene.stitches[i].box.corners()
            parts.append(
                _polyline([corners[0], corners[2], corners[1], corners[3]],
                          RED, f"error e4-aspect stitch-{i}", red_stroke)
            )
    for i, flag in enumerate(report.e4_width_flags):
        if flag:
            p, q = _width_axis(scene.stitches[i])
            parts.append(_line(p, q, RED, f"error e4-width stitch-{i}", red_stroke))
    for i, flag in enumerate(report.e5_flags):
        if flag:
            parts.append(
                _line(centers[i], centers[i + 1], RED, f"error e5 gap-{i}", red_stroke)
            )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def count_red_elements(svg: str) -> int:
    """Number of flagged (red) elements in an overlay, for report validation."""
    return svg.count(f'stroke="{RED}"')
