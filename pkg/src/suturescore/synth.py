"""Seeded generator of synthetic stitch-layout scenes with exact ground truth.

Scenes are built in an unrolled view: a long vessel rectangle with stitches
straddling its junction line, nominally perpendicular, equidistant, and three
needle diameters wide.  Controlled injections perturb exactly one target each:

* E1 displaces a stitch center off the line until the bend angle between its
  two adjacent gap vectors reaches the requested value,
* E2 rotates a stitch away from perpendicular,
* E3 widens a stitch's bite,
* E4 flattens a stitch's aspect ratio, narrows its bite, or drops it,
* E5 shifts everything after one gap so that gap reaches a target
  normalized distance.

Ground truth is evaluated analytically on the generating rectangles (no
rasterization, no fitting), then every attribute is checked to sit a safety
margin away from its detection threshold so measurement noise cannot flip a
flag.  Output is deterministic for a fixed (spec, seed).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DEFAULT_THRESHOLDS, ErrorReport, Thresholds
from .interchange import AnnotationSet, Instance, InterchangeWarning

ERROR_TYPES = ("E1", "E2", "E3", "E4", "E5")
E4_MODES = ("low_aspect", "low_width", "drop")


class GenerationError(ValueError):
    """Raised when a spec cannot be realized as an unambiguous scene."""


@dataclass(frozen=True)
class Injection:
    """One deliberate error.

    ``target`` is a stitch index for E1-E4 and a gap index for E5 (the gap
    between stitches ``target`` and ``target + 1``).  ``magnitude`` units:
    degrees for E1 (bend angle) and E2 (rotation), normalized width for E3
    and E4 ``low_width``, aspect ratio for E4 ``low_aspect``, normalized gap
    distance for E5.  ``None`` derives the magnitude from the detection
    thresholds and the scene spec's margin factor.
    """

    error_type: str
    target: int
    magnitude: float | None = None
    mode: str | None = None

    def __post_init__(self):
        if self.error_type not in ERROR_TYPES:
            raise GenerationError(f"unknown error type {self.error_type!r}")
        if self.error_type == "E4":
            mode = self.mode or "low_aspect"
            if mode not in E4_MODES:
                raise GenerationError(f"unknown E4 mode {mode!r}")
            object.__setattr__(self, "mode", mode)
        elif self.mode is not None:
            raise GenerationError(f"mode is only meaningful for E4, got {self.mode!r}")

    def to_dict(self) -> dict:
        doc: dict = {"error_type": self.error_type, "target": self.target}
        if self.magnitude is not None:
            doc["magnitude"] = self.magnitude
        if self.mode is not None:
            doc["mode"] = self.mode
        return doc


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of a synthetic scene.

    The nominal bite width is three needle diameters and the nominal stitch
    thickness one needle diameter, so the nominal aspect ratio is 3.
    Injection magnitudes default to their threshold times (or divided by)
    ``margin_factor``; benign jitter amplitudes must be small enough that
    uninjected attributes stay clear of every threshold, which
    ``generate_scene`` verifies against the safety gaps.
    """

    vessel_length: float = 2300.0
    vessel_height: float = 340.0
    stitch_count: int = 8
    needle_diameter: float = 72.0
    spacing_ratio: float = 0.125
    injections: tuple[Injection, ...] = ()
    margin_factor: float = 1.5
    center_jitter: float = 8.0
    rotation_jitter_deg: float = 5.0
    size_jitter_frac: float = 0.04
    rotation_deg: float | None = None
    image_width: int = 3000
    image_height: int = 3000
    image_id: str | None = None
    safety_gap_deg: float = 1.0
    safety_gap_ratio: float = 0.004
    safety_gap_aspect: float = 0.05
    min_center_separation: float = 100.0

    def __post_init__(self):
        if self.stitch_count < 2:
            raise GenerationError("stitch_count must be >= 2")
        if self.margin_factor <= 1.0:
            raise GenerationError("margin_factor must exceed 1")
        object.__setattr__(self, "injections", tuple(self.injections))
        for inj in self.injections:
            hi = self.stitch_count - 2 if inj.error_type == "E5" else self.stitch_count - 1
            if not 0 <= inj.target <= hi:
                raise GenerationError(
                    f"{inj.error_type} target {inj.target} outside [0, {hi}]"
                )
        seen = set()
        for inj in self.injections:
            key = (inj.error_type, inj.target)
            if key in seen:
                raise GenerationError(f"duplicate injection {key}")
            seen.add(key)

    @property
    def nominal_width(self) -> float:
        return 3.0 * self.needle_diameter

    def to_dict(self) -> dict:
        doc = {
            "vessel_length": self.vessel_length,
            "vessel_height": self.vessel_height,
            "stitch_count": self.stitch_count,
            "needle_diameter": self.needle_diameter,
            "spacing_ratio": self.spacing_ratio,
            "injections": [inj.to_dict() for inj in self.injections],
            "margin_factor": self.margin_factor,
            "center_jitter": self.center_jitter,
            "rotation_jitter_deg": self.rotation_jitter_deg,
            "size_jitter_frac": self.size_jitter_frac,
            "rotation_deg": self.rotation_deg,
            "image_width": self.image_width,
            "image_height": self.image_height,
            "image_id": self.image_id,
            "safety_gap_deg": self.safety_gap_deg,
            "safety_gap_ratio": self.safety_gap_ratio,
            "safety_gap_aspect": self.safety_gap_aspect,
            "min_center_separation": self.min_center_separation,
        }
        return doc


def load_scene_spec(source: bytes | str | dict) -> SceneSpec:
    """Parse a scene-spec JSON document mirroring the SceneSpec fields."""
    if isinstance(source, dict):
        doc = source
    else:
        if isinstance(source, bytes):
            source = source.decode("utf-8")
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise GenerationError(f"malformed scene spec: {exc}") from exc
    if not isinstance(doc, dict):
        raise GenerationError("scene spec must be a JSON object")
    known = set(SceneSpec.__dataclass_fields__)
    for key in sorted(set(doc) - known):
        warnings.warn(f"ignoring unknown scene-spec field {key!r}", InterchangeWarning)
    kwargs = {k: v for k, v in doc.items() if k in known and k != "injections"}
    injections = []
    for raw in doc.get("injections", []):
        injections.append(
            Injection(
                error_type=raw["error_type"],
                target=int(raw["target"]),
                magnitude=raw.get("magnitude"),
                mode=raw.get("mode"),
            )
        )
    return SceneSpec(injections=tuple(injections), **kwargs)


def serialize_scene_spec(spec: SceneSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class GroundTruthErrors:
    """Expected detection outcome plus the exact generating attributes.

    Flag indices refer to stitches sorted along the junction line, matching
    detector output.  The attribute arrays are evaluated analytically from
    the generating rectangles and serve as the formula oracle for the
    measurement path.
    """

    e1_flags: tuple[bool, ...]
    e2_flags: tuple[bool, ...]
    e3_flags: tuple[bool, ...]
    e4_aspect_flags: tuple[bool, ...]
    e4_width_flags: tuple[bool, ...]
    e5_flags: tuple[bool, ...]
    missing_count: int
    alpha_deg: tuple[float, ...]
    aspect: tuple[float, ...]
    norm_width: tuple[float, ...]
    beta_deg: tuple[float, ...]
    norm_gaps: tuple[float, ...]
    line_dir: tuple[float, float]
    vessel_axis_len: float

    @property
    def s1(self) -> int:
        return sum(self.e1_flags)

    @property
    def s2(self) -> int:
        return sum(self.e2_flags)

    @property
    def s3(self) -> int:
        return sum(self.e3_flags)

    @property
    def s4(self) -> int:
        return sum(self.e4_aspect_flags) + sum(self.e4_width_flags) + self.missing_count

    @property
    def s5(self) -> int:
        return sum(self.e5_flags)

    def counts(self) -> tuple[int, int, int, int, int]:
        return (self.s1, self.s2, self.s3, self.s4, self.s5)

    def matches(self, report: ErrorReport) -> bool:
        """True iff the report's flags and missing count agree exactly."""
        return (
            self.e1_flags == report.e1_flags
            and self.e2_flags == report.e2_flags
            and self.e3_flags == report.e3_flags
            and self.e4_aspect_flags == report.e4_aspect_flags
            and self.e4_width_flags == report.e4_width_flags
            and self.e5_flags == report.e5_flags
            and self.missing_count == report.missing_count
        )

    def to_dict(self) -> dict:
        return {
            "s1": self.s1,
            "s2": self.s2,
            "s3": self.s3,
            "s4": self.s4,
            "s5": self.s5,
            "missing_count": self.missing_count,
            "e1_flags": list(self.e1_flags),
            "e2_flags": list(self.e2_flags),
            "e3_flags": list(self.e3_flags),
            "e4_aspect_flags": list(self.e4_aspect_flags),
            "e4_width_flags": list(self.e4_width_flags),
            "e5_flags": list(self.e5_flags),
            "attributes": {
                "alpha_deg": list(self.alpha_deg),
                "aspect": list(self.aspect),
                "norm_width": list(self.norm_width),
                "beta_deg": list(self.beta_deg),
                "norm_gaps": list(self.norm_gaps),
            },
            "line_dir": list(self.line_dir),
            "vessel_axis_len": self.vessel_axis_len,
        }


def _bend_deg(prev: np.ndarray, mid: np.ndarray, nxt: np.ndarray) -> float:
    g1 = mid - prev
    g2 = nxt - mid
    u1 = g1 / np.linalg.norm(g1)
    u2 = g2 / np.linalg.norm(g2)
    return math.degrees(math.acos(min(1.0, max(-1.0, float(u1 @ u2)))))


def _solve_displacement(prev, mid, nxt, target_deg: float) -> float:
    """Perpendicular offset of ``mid`` making the bend angle hit ``target_deg``."""
    span = max(np.linalg.norm(nxt - prev), 1.0)
    lo, hi = 0.0, 4.0 * float(span)
    base = _bend_deg(prev, mid, nxt)
    if base >= target_deg:
        raise GenerationError(
            f"bend angle already {base:.2f} deg before displacement; "
            f"cannot hit {target_deg:.2f} deg from below"
        )
    offset = np.array([0.0, 1.0])
    if _bend_deg(prev, mid + hi * offset, nxt) < target_deg:
        raise GenerationError("bend target unreachable")
    for _ in range(100):
        d = 0.5 * (lo + hi)
        if _bend_deg(prev, mid + d * offset, nxt) < target_deg:
            lo = d
        else:
            hi = d
    return 0.5 * (lo + hi)


def _principal_axis(points: np.ndarray) -> np.ndarray:
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    v = eigvecs[:, int(np.argmax(eigvals))]
    if v[0] < 0.0 or (v[0] == 0.0 and v[1] < 0.0):
        v = -v
    return v / np.linalg.norm(v)


def _check_margin(violations: list[str], label: str, value: float,
                  threshold: float, gap: float):
    if abs(value - threshold) < gap:
        violations.append(
            f"{label} = {value:.4f} within {gap} of threshold {threshold:.4f}"
        )


def generate_scene(
    spec: SceneSpec,
    seed: int,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
) -> tuple[AnnotationSet, GroundTruthErrors]:
    """Generate one annotated scene and its exact expected detection outcome.

    Deterministic for a fixed (spec, seed).  Raises GenerationError when
    injections collide, stitches end up too close to order unambiguously,
    any attribute lands inside a safety gap around a threshold, or the scene
    overflows the image bounds.
    """
    rng = np.random.default_rng(seed)
    t = thresholds
    L = spec.vessel_length
    n_total = spec.stitch_count
    w_nom = spec.nominal_width
    h_nom = spec.needle_diameter

    by_type: dict[str, list[Injection]] = {key: [] for key in ERROR_TYPES}
    for inj in spec.injections:
        by_type[inj.error_type].append(inj)

    spacing = spec.spacing_ratio * L
    xs = (np.arange(n_total) - (n_total - 1) / 2.0) * spacing
    ys = np.zeros(n_total)

    # E5: retarget one gap by shifting everything after it along the line.
    for inj in by_type["E5"]:
        target_ratio = inj.magnitude if inj.magnitude is not None else t.l_d_plus * spec.margin_factor
        g = inj.target
        delta = target_ratio * L - (xs[g + 1] - xs[g])
        xs[g + 1:] += delta

    xs = xs + rng.uniform(-spec.center_jitter, spec.center_jitter, n_total)
    ys = ys + rng.uniform(-spec.center_jitter, spec.center_jitter, n_total)

    dropped = {inj.target for inj in by_type["E4"] if inj.mode == "drop"}
    for inj in spec.injections:
        if inj.target in dropped and not (inj.error_type == "E4" and inj.mode == "drop"):
            if inj.error_type != "E5":
                raise GenerationError(
                    f"{inj.error_type} targets dropped stitch {inj.target}"
                )
    kept = [i for i in range(n_total) if i not in dropped]
    if len(kept) < 2:
        raise GenerationError("fewer than 2 stitches remain after drops")
    remap = {orig: new for new, orig in enumerate(kept)}
    xs = xs[kept]
    ys = ys[kept]
    n = len(kept)

    # E1: displace a stitch off the line until its bend angle hits the target.
    for inj in by_type["E1"]:
        if inj.target not in remap:
            raise GenerationError(f"E1 targets dropped stitch {inj.target}")
        j = remap[inj.target]
        if not 1 <= j <= n - 2:
            raise GenerationError(
                f"E1 target {inj.target} has no neighbor on both sides"
            )
        target_deg = inj.magnitude if inj.magnitude is not None else t.beta_star * spec.margin_factor
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        prev_c = np.array([xs[j - 1], ys[j - 1]])
        mid_c = np.array([xs[j], ys[j]])
        nxt_c = np.array([xs[j + 1], ys[j + 1]])
        d = _solve_displacement(prev_c, mid_c, nxt_c, target_deg)
        ys[j] += sign * d

    centers = np.column_stack([xs, ys])
    line = _principal_axis(centers)
    side = np.array([-line[1], line[0]])

    proj = centers @ line
    order = np.lexsort((centers @ side, proj))
    if not np.array_equal(order, np.arange(n)):
        # Sorting may legitimately reorder after large spacing injections.
        centers = centers[order]
        proj = proj[order]
        remap = {orig: int(np.argwhere(order == new)[0][0]) for orig, new in remap.items()}
    if np.any(np.diff(proj) < spec.min_center_separation):
        raise GenerationError(
            "stitch centers closer than min_center_separation; scene unresolvable"
        )

    phi = rng.uniform(-spec.rotation_jitter_deg, spec.rotation_jitter_deg, n)
    widths = w_nom * (1.0 + rng.uniform(-spec.size_jitter_frac, spec.size_jitter_frac, n))
    heights = h_nom * (1.0 + rng.uniform(-spec.size_jitter_frac, spec.size_jitter_frac, n))
    e2_signs = rng.uniform(size=len(by_type["E2"])) < 0.5

    alpha_cap = (t.alpha_star + 45.0) / 2.0
    for which, inj in enumerate(by_type["E2"]):
        j = remap[inj.target]
        mag = inj.magnitude if inj.magnitude is not None else min(
            t.alpha_star * spec.margin_factor, alpha_cap
        )
        phi[j] = mag * (1.0 if e2_signs[which] else -1.0)
    for inj in by_type["E3"]:
        j = remap[inj.target]
        ratio = inj.magnitude if inj.magnitude is not None else t.l_w_plus * spec.margin_factor
        widths[j] = ratio * L
        heights[j] = h_nom
    for inj in by_type["E4"]:
        if inj.mode == "drop":
            continue
        j = remap[inj.target]
        if inj.mode == "low_aspect":
            aspect = inj.magnitude if inj.magnitude is not None else t.a_star / spec.margin_factor
            widths[j] = w_nom
            heights[j] = w_nom / aspect
        else:  # low_width: narrow the bite, keeping the nominal aspect ratio
            ratio = inj.magnitude if inj.magnitude is not None else t.l_w_minus / spec.margin_factor
            widths[j] = ratio * L
            heights[j] = widths[j] / (w_nom / h_nom)

    alpha = np.abs(phi)
    aspect = widths / heights
    norm_width = widths / L
    gaps = np.diff(centers, axis=0)
    gap_units = gaps / np.linalg.norm(gaps, axis=1, keepdims=True)
    beta = np.array(
        [
            math.degrees(math.acos(min(1.0, max(-1.0, float(gap_units[i] @ gap_units[i + 1])))))
            for i in range(n - 2)
        ]
    )
    norm_gaps = gaps @ line / L

    violations: list[str] = []
    line_tilt = math.degrees(math.atan2(abs(line[1]), abs(line[0])))
    if line_tilt > 45.0 - spec.safety_gap_deg:
        violations.append(f"junction line tilted {line_tilt:.2f} deg off the vessel axis")
    for i in range(n):
        _check_margin(violations, f"alpha[{i}]", alpha[i], t.alpha_star, spec.safety_gap_deg)
        if alpha[i] > 45.0 - spec.safety_gap_deg:
            violations.append(f"alpha[{i}] = {alpha[i]:.2f} too close to the 45 deg fold")
        _check_margin(violations, f"aspect[{i}]", aspect[i], t.a_star, spec.safety_gap_aspect)
        _check_margin(violations, f"norm_width[{i}]", norm_width[i], t.l_w_minus, spec.safety_gap_ratio)
        _check_margin(violations, f"norm_width[{i}]", norm_width[i], t.l_w_plus, spec.safety_gap_ratio)
    for i in range(n - 2):
        _check_margin(violations, f"beta[{i}]", beta[i], t.beta_star, spec.safety_gap_deg)
    for i in range(n - 1):
        _check_margin(violations, f"norm_gap[{i}]", norm_gaps[i], t.l_d_minus, spec.safety_gap_ratio)
        _check_margin(violations, f"norm_gap[{i}]", norm_gaps[i], t.l_d_plus, spec.safety_gap_ratio)
    if violations:
        raise GenerationError(
            "attributes too close to thresholds: " + "; ".join(violations)
        )

    theta = spec.rotation_deg if spec.rotation_deg is not None else float(rng.uniform(12.0, 78.0))
    theta_rad = math.radians(theta)
    rot = np.array(
        [
            [math.cos(theta_rad), -math.sin(theta_rad)],
            [math.sin(theta_rad), math.cos(theta_rad)],
        ]
    )
    shift = np.array([spec.image_width / 2.0, spec.image_height / 2.0])

    def place(points: np.ndarray) -> np.ndarray:
        return points @ rot.T + shift

    def rect_polygon(center: np.ndarray, axis_u: np.ndarray, half_u: float,
                     half_v: float) -> np.ndarray:
        axis_v = np.array([-axis_u[1], axis_u[0]])
        a = axis_u * half_u
        b = axis_v * half_v
        return place(np.array([center + a + b, center - a + b, center - a - b, center + a - b]))

    instances = [
        Instance(
            class_label="vessel",
            polygon=tuple(
                map(tuple, rect_polygon(np.zeros(2), np.array([1.0, 0.0]),
                                        L / 2.0, spec.vessel_height / 2.0))
            ),
        )
    ]
    for i in range(n):
        phi_rad = math.radians(phi[i])
        cos_p, sin_p = math.cos(phi_rad), math.sin(phi_rad)
        aligned = np.array(
            [line[0] * cos_p - line[1] * sin_p, line[0] * sin_p + line[1] * cos_p]
        )
        poly = rect_polygon(centers[i], aligned, heights[i] / 2.0, widths[i] / 2.0)
        instances.append(
            Instance(class_label="stitch", polygon=tuple(map(tuple, poly)))
        )

    for idx, inst in enumerate(instances):
        for x, y in inst.polygon:
            if not (0.0 <= x <= spec.image_width and 0.0 <= y <= spec.image_height):
                raise GenerationError(
                    f"instance {idx} vertex ({x:.1f}, {y:.1f}) outside the "
                    f"{spec.image_width}x{spec.image_height} image"
                )

    annotations = AnnotationSet(
        image_id=spec.image_id or f"synth-{seed}",
        width=spec.image_width,
        height=spec.image_height,
        instances=tuple(instances),
    )

    line_img = rot @ line
    flipped = line_img[0] < 0.0 or (line_img[0] == 0.0 and line_img[1] < 0.0)
    if flipped:
        line_img = -line_img
    if abs(line_img[0]) < 0.005:
        raise GenerationError(
            "junction line is nearly vertical; stitch order is ambiguous "
            "under the sign convention"
        )
    if flipped:
        # The detector normalizes the line sign to x >= 0, which reverses its
        # stitch ordering relative to the construction frame.
        alpha = alpha[::-1]
        aspect = aspect[::-1]
        norm_width = norm_width[::-1]
        beta = beta[::-1]
        norm_gaps = norm_gaps[::-1]

    ground_truth = GroundTruthErrors(
        e1_flags=tuple(bool(b > t.beta_star) for b in beta),
        e2_flags=tuple(bool(a > t.alpha_star) for a in alpha),
        e3_flags=tuple(bool(w > t.l_w_plus) for w in norm_width),
        e4_aspect_flags=tuple(bool(a < t.a_star) for a in aspect),
        e4_width_flags=tuple(bool(w < t.l_w_minus) for w in norm_width),
        e5_flags=tuple(bool(g < t.l_d_minus or g > t.l_d_plus) for g in norm_gaps),
        missing_count=n_total - n,
        alpha_deg=tuple(float(a) for a in alpha),
        aspect=tuple(float(a) for a in aspect),
        norm_width=tuple(float(w) for w in norm_width),
        beta_deg=tuple(float(b) for b in beta),
        norm_gaps=tuple(float(g) for g in norm_gaps),
        line_dir=(float(line_img[0]), float(line_img[1])),
        vessel_axis_len=float(L),
    )
    return annotations, ground_truth
