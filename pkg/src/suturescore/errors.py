"""Error detection: thresholded counts of the five stitch-layout error types.

The five detected error types, with their triggering conditions:

* E1 -- broken junction line: bend angle between consecutive gap vectors
  exceeds ``beta_star``.
* E2 -- oblique stitch: stitch orientation deviation exceeds ``alpha_star``.
* E3 -- bite too wide: normalized stitch width exceeds ``l_w_plus``.
* E4 -- shallow stitch: aspect ratio below ``a_star``, normalized width
  below ``l_w_minus``, or a stitch missing entirely (expected minus
  detected count, clamped at zero).
* E5 -- uneven spacing: normalized gap distance outside the
  ``[l_d_minus, l_d_plus]`` band.

All comparisons are strict.  A value exactly at a threshold never counts as
an error.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

from .interchange import InterchangeWarning
from .scene import SceneGeometry

THRESHOLD_FIELDS = (
    "beta_star",
    "alpha_star",
    "a_star",
    "l_w_minus",
    "l_w_plus",
    "l_d_minus",
    "l_d_plus",
)


class ThresholdError(ValueError):
    """Raised for threshold configurations violating ordering or positivity."""


@dataclass(frozen=True)
class Thresholds:
    """The seven calibrated detection constants."""

    beta_star: float = 29.80
    alpha_star: float = 38.11
    a_star: float = 2.43
    l_w_minus: float = 0.06
    l_w_plus: float = 0.13
    l_d_minus: float = 0.07
    l_d_plus: float = 0.148

    def __post_init__(self):
        for name in THRESHOLD_FIELDS:
            value = float(getattr(self, name))
            object.__setattr__(self, name, value)
            # The two lower bounds may sit at the 0.0 grid boundary, meaning
            # "no lower check": calibration emits that when a corpus contains
            # no narrow-width / narrow-gap errors.
            if value < 0.0 or (value == 0.0 and name not in ("l_w_minus", "l_d_minus")):
                raise ThresholdError(f"{name} must be positive, got {value}")
        if not self.l_w_minus < self.l_w_plus:
            raise ThresholdError(
                f"l_w_minus ({self.l_w_minus}) must be < l_w_plus ({self.l_w_plus})"
            )
        if not self.l_d_minus < self.l_d_plus:
            raise ThresholdError(
                f"l_d_minus ({self.l_d_minus}) must be < l_d_plus ({self.l_d_plus})"
            )

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in THRESHOLD_FIELDS}


DEFAULT_THRESHOLDS = Thresholds()


@dataclass(frozen=True)
class DetectionConfig:
    """Detection-time expectations; ``expected_stitches`` is the planned count."""

    expected_stitches: int = 8

    def __post_init__(self):
        if self.expected_stitches < 1:
            raise ValueError("expected_stitches must be >= 1")


@dataclass(frozen=True)
class ErrorReport:
    """Per-image error counts with the per-stitch / per-gap flags behind them.

    Flag array sizes for a scene with n stitches: ``e2/e3/e4_*`` have n
    entries, ``e5`` has n-1, ``e1`` has n-2.  E4 keeps separate aspect and
    width flag arrays because one stitch may trip both conditions and each
    occurrence counts.
    """

    e1_flags: tuple[bool, ...]
    e2_flags: tuple[bool, ...]
    e3_flags: tuple[bool, ...]
    e4_aspect_flags: tuple[bool, ...]
    e4_width_flags: tuple[bool, ...]
    e5_flags: tuple[bool, ...]
    missing_count: int
    notes: tuple[str, ...] = ()

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
            "notes": list(self.notes),
        }


def detect_all(
    scene: SceneGeometry,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    config: DetectionConfig = DetectionConfig(),
) -> ErrorReport:
    """Evaluate all five error conditions on a reconstructed scene."""
    t = thresholds
    n = scene.n
    notes = []
    if n < 3:
        notes.append("insufficient stitches for bend-angle (E1) evaluation")
    if n < 2:
        notes.append("insufficient stitches for spacing (E5) evaluation")

    e1 = tuple(b > t.beta_star for b in scene.beta_deg)
    e2 = tuple(s.alpha_deg > t.alpha_star for s in scene.stitches)
    e3 = tuple(s.norm_width > t.l_w_plus for s in scene.stitches)
    e4_aspect = tuple(s.aspect < t.a_star for s in scene.stitches)
    e4_width = tuple(s.norm_width < t.l_w_minus for s in scene.stitches)
    e5 = tuple(g < t.l_d_minus or g > t.l_d_plus for g in scene.norm_gaps)
    missing = max(0, config.expected_stitches - n)

    return ErrorReport(
        e1_flags=e1,
        e2_flags=e2,
        e3_flags=e3,
        e4_aspect_flags=e4_aspect,
        e4_width_flags=e4_width,
        e5_flags=e5,
        missing_count=missing,
        notes=tuple(notes),
    )


def load_thresholds(source: bytes | str | dict | None = None) -> Thresholds:
    """Load thresholds from a JSON key-value document.

    Missing fields keep their calibrated defaults; unknown fields are
    ignored with a warning; ordering violations raise ThresholdError.
    """
    if source is None:
        doc: dict = {}
    elif isinstance(source, dict):
        doc = source
    else:
        if isinstance(source, bytes):
            source = source.decode("utf-8")
        source = source.strip()
        try:
            doc = json.loads(source) if source else {}
        except json.JSONDecodeError as exc:
            raise ThresholdError(f"malformed threshold document: {exc}") from exc
        if not isinstance(doc, dict):
            raise ThresholdError("threshold document must be a JSON object")
    for key in sorted(set(doc) - set(THRESHOLD_FIELDS)):
        warnings.warn(f"ignoring unknown threshold field {key!r}", InterchangeWarning)
    kwargs = {k: float(v) for k, v in doc.items() if k in THRESHOLD_FIELDS}
    return Thresholds(**kwargs)


def serialize_thresholds(thresholds: Thresholds) -> str:
    """Serialize thresholds to the JSON form ``load_thresholds`` accepts."""
    return json.dumps(thresholds.to_dict(), indent=2, sort_keys=True) + "\n"
