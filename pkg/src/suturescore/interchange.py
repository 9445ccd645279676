"""Annotation and score-table data model: file formats, validation, rasterization.

Annotation files are JSON documents, one per image:

    {"image_id": "img-001", "width": 1024, "height": 768,
     "instances": [{"class": "stitch", "polygon": [[x, y], ...],
                    "confidence": 0.93}, ...]}

``confidence`` is optional and is absent for ground-truth or synthetic
annotations; detector output must carry it.  Score files are CSV with the
header ``image_id,rater_id,trial_id,e1,e2,e3,e4,e5``.  Unknown fields in
either format are ignored with a warning.

Coordinates are continuous (sub-pixel positions are allowed).  The pixel at
row ``r``, column ``c`` has its center at ``(c + 0.5, r + 0.5)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

CLASS_LABELS = ("stitch", "vessel")

STITCH = "stitch"
VESSEL = "vessel"

SCORE_COLUMNS = ("image_id", "rater_id", "trial_id", "e1", "e2", "e3", "e4", "e5")


class AnnotationError(ValueError):
    """Raised for malformed or invariant-violating annotation data."""


class ScoreTableError(ValueError):
    """Raised for malformed or invariant-violating score tables."""


class InterchangeWarning(UserWarning):
    """Non-fatal oddities in interchange documents (unknown fields, ...)."""


def polygon_area(polygon) -> float:
    """Signed shoelace area of a polygon given as an (n, 2) coordinate sequence."""
    pts = np.asarray(polygon, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Instance:
    """A single annotated object: class label, polygon outline, optional confidence."""

    class_label: str
    polygon: tuple[tuple[float, float], ...]
    confidence: float | None = None

    def __post_init__(self):
        if self.class_label not in CLASS_LABELS:
            raise AnnotationError(
                f"unknown class label {self.class_label!r} (expected one of {CLASS_LABELS})"
            )
        poly = tuple((float(x), float(y)) for x, y in self.polygon)
        object.__setattr__(self, "polygon", poly)
        if len(poly) < 3:
            raise AnnotationError(f"polygon has {len(poly)} vertices (need >= 3)")
        for x, y in poly:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise AnnotationError(f"non-finite polygon vertex ({x}, {y})")
        if polygon_area(poly) == 0.0:
            raise AnnotationError("polygon has zero area")
        if self.confidence is not None:
            conf = float(self.confidence)
            if not (0.0 <= conf <= 1.0):
                raise AnnotationError(f"confidence {conf} outside [0, 1]")
            object.__setattr__(self, "confidence", conf)

    def polygon_array(self) -> np.ndarray:
        return np.asarray(self.polygon, dtype=float)


@dataclass(frozen=True)
class AnnotationSet:
    """All instance annotations for one image."""

    image_id: str
    width: int
    height: int
    instances: tuple[Instance, ...]

    def __post_init__(self):
        if not self.image_id:
            raise AnnotationError("image_id must be nonempty")
        if self.width <= 0 or self.height <= 0:
            raise AnnotationError(
                f"image dimensions must be positive, got {self.width}x{self.height}"
            )
        object.__setattr__(self, "instances", tuple(self.instances))
        for idx, inst in enumerate(self.instances):
            for x, y in inst.polygon:
                if not (0.0 <= x <= self.width and 0.0 <= y <= self.height):
                    raise AnnotationError(
                        f"instance {idx}: vertex ({x}, {y}) outside "
                        f"{self.width}x{self.height} image bounds"
                    )

    def by_class(self, class_label: str) -> tuple[Instance, ...]:
        return tuple(i for i in self.instances if i.class_label == class_label)


def parse_annotation_file(data: bytes | str) -> AnnotationSet:
    """Parse and validate one annotation document.

    Errors name the offending instance by its index in the file; instance
    order is preserved.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"malformed annotation document: {exc}") from exc
    if not isinstance(doc, dict):
        raise AnnotationError("annotation document must be a JSON object")

    known = {"image_id", "width", "height", "instances"}
    for key in sorted(set(doc) - known):
        warnings.warn(f"ignoring unknown annotation field {key!r}", InterchangeWarning)
    for key in ("image_id", "width", "height", "instances"):
        if key not in doc:
            raise AnnotationError(f"missing required field {key!r}")

    raw_instances = doc["instances"]
    if not isinstance(raw_instances, list):
        raise AnnotationError("'instances' must be an array")

    instances = []
    for idx, raw in enumerate(raw_instances):
        if not isinstance(raw, dict):
            raise AnnotationError(f"instance {idx}: expected an object")
        for key in sorted(set(raw) - {"class", "polygon", "confidence"}):
            warnings.warn(
                f"instance {idx}: ignoring unknown field {key!r}", InterchangeWarning
            )
        for key in ("class", "polygon"):
            if key not in raw:
                raise AnnotationError(f"instance {idx}: missing field {key!r}")
        try:
            polygon = tuple((float(p[0]), float(p[1])) for p in raw["polygon"])
        except (TypeError, ValueError, IndexError) as exc:
            raise AnnotationError(f"instance {idx}: malformed polygon") from exc
        try:
            instances.append(
                Instance(
                    class_label=raw["class"],
                    polygon=polygon,
                    confidence=raw.get("confidence"),
                )
            )
        except AnnotationError as exc:
            raise AnnotationError(f"instance {idx}: {exc}") from exc

    try:
        return AnnotationSet(
            image_id=str(doc["image_id"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
            instances=tuple(instances),
        )
    except AnnotationError:
        raise
    except (TypeError, ValueError) as exc:
        raise AnnotationError(f"malformed annotation document: {exc}") from exc


def serialize_annotation_set(ann: AnnotationSet) -> str:
    """Serialize an AnnotationSet to its JSON document form (round-trips exactly)."""
    instances = []
    for inst in ann.instances:
        entry: dict = {
            "class": inst.class_label,
            "polygon": [[x, y] for x, y in inst.polygon],
        }
        if inst.confidence is not None:
            entry["confidence"] = inst.confidence
        instances.append(entry)
    doc = {
        "image_id": ann.image_id,
        "width": ann.width,
        "height": ann.height,
        "instances": instances,
    }
    return json.dumps(doc, indent=2) + "\n"


@dataclass(frozen=True)
class ScoreRow:
    """One rater's error counts for one image in one scoring session."""

    image_id: str
    rater_id: str
    trial_id: str
    counts: tuple[int, int, int, int, int]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != 5:
            raise ScoreTableError(f"expected 5 error counts, got {len(counts)}")
        if any(c < 0 for c in counts):
            raise ScoreTableError(f"negative error count in {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.image_id, self.rater_id, self.trial_id)


@dataclass(frozen=True)
class RaterScoreTable:
    """Error-count rows keyed by (image_id, rater_id, trial_id)."""

    rows: tuple[ScoreRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        seen = set()
        for row in self.rows:
            if row.key in seen:
                raise ScoreTableError(f"duplicate score row for key {row.key}")
            seen.add(row.key)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def image_ids(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.image_id, None)
        return tuple(seen)

    def assignments(self) -> tuple[tuple[str, str], ...]:
        """Distinct (rater_id, trial_id) pairs, in row order."""
        seen: dict[tuple[str, str], None] = {}
        for row in self.rows:
            seen.setdefault((row.rater_id, row.trial_id), None)
        return tuple(seen)

    def for_assignment(self, rater_id: str, trial_id: str) -> dict[str, tuple[int, ...]]:
        """Per-image counts for one (rater, trial), preserving row order."""
        return {
            row.image_id: row.counts
            for row in self.rows
            if row.rater_id == rater_id and row.trial_id == trial_id
        }

    def single_assignment(self) -> dict[str, tuple[int, ...]]:
        """Per-image counts when the table holds exactly one (rater, trial)."""
        pairs = self.assignments()
        if len(pairs) != 1:
            raise ScoreTableError(
                f"score table holds {len(pairs)} (rater, trial) assignments; "
                "expected exactly one"
            )
        return self.for_assignment(*pairs[0])


def parse_scores(data: bytes | str) -> RaterScoreTable:
    """Parse a CSV score file into a validated RaterScoreTable."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    reader = csv.reader(io.StringIO(data))
    try:
        header = next(reader)
    except StopIteration:
        raise ScoreTableError("empty score file") from None
    header = [h.strip() for h in header]
    missing = [c for c in SCORE_COLUMNS if c not in header]
    if missing:
        raise ScoreTableError(f"score file missing columns: {', '.join(missing)}")
    extra = [c for c in header if c not in SCORE_COLUMNS]
    if extra:
        warnings.warn(
            f"ignoring unknown score columns: {', '.join(extra)}", InterchangeWarning
        )
    col = {name: header.index(name) for name in SCORE_COLUMNS}

    rows = []
    for lineno, record in enumerate(reader, start=2):
        if not record or all(not cell.strip() for cell in record):
            continue
        if len(record) < len(header):
            raise ScoreTableError(f"line {lineno}: expected {len(header)} fields")
        try:
            counts = tuple(int(record[col[f"e{k}"]]) for k in range(1, 6))
        except ValueError as exc:
            raise ScoreTableError(f"line {lineno}: non-integer error count") from exc
        try:
            rows.append(
                ScoreRow(
                    image_id=record[col["image_id"]].strip(),
                    rater_id=record[col["rater_id"]].strip(),
                    trial_id=record[col["trial_id"]].strip(),
                    counts=counts,
                )
            )
        except ScoreTableError as exc:
            raise ScoreTableError(f"line {lineno}: {exc}") from exc
    return RaterScoreTable(rows=tuple(rows))


def serialize_scores(table: RaterScoreTable) -> str:
    """Serialize a RaterScoreTable to CSV (round-trips exactly)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SCORE_COLUMNS)
    for row in table.rows:
        writer.writerow([row.image_id, row.rater_id, row.trial_id, *row.counts])
    return out.getvalue()


class BinaryMask:
    """Per-pixel set membership for one image (row-major boolean grid)."""

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels, dtype=bool)
        if pixels.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {pixels.shape}")
        self.pixels = pixels

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def count(self) -> int:
        return int(self.pixels.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryMask) and np.array_equal(self.pixels, other.pixels)


def _winding_grid(polygon: np.ndarray, x0: float, y0: float, w: int, h: int) -> np.ndarray:
    """Winding numbers of pixel centers on a w x h grid with origin (x0, y0)."""
    xc = x0 + np.arange(w, dtype=float) + 0.5
    y_first = y0 + 0.5
    wn = np.zeros((h, w), dtype=np.int32)
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if y1 == y2:
            continue
        lo, hi = (y1, y2) if y1 < y2 else (y2, y1)
        # Rows whose centers satisfy lo <= yc < hi form a contiguous slice.
        r0 = max(0, math.ceil(lo - y_first))
        r1 = min(h, math.ceil(hi - y_first))
        if r0 >= r1:
            continue
        yc = (y_first + np.arange(r0, r1, dtype=float))[:, None]
        side = (x2 - x1) * (yc - y1) - (xc - x1) * (y2 - y1)
        if y1 < y2:  # upward edge: count pixel centers strictly left of it
            wn[r0:r1] += side > 0
        else:  # downward edge: count pixel centers strictly right of it
            wn[r0:r1] -= side < 0
    return wn


def rasterize_window(polygon, x0: int, y0: int, w: int, h: int) -> np.ndarray:
    """Rasterize onto a sub-grid with integer pixel origin (x0, y0).

    A pixel is set iff its center lies inside the polygon under the nonzero
    winding rule.  Returns a (h, w) boolean array.
    """
    pts = np.asarray(polygon, dtype=float)
    if len(pts) < 3:
        raise AnnotationError(f"polygon has {len(pts)} vertices (need >= 3)")
    if polygon_area(pts) == 0.0:
        warnings.warn("rasterizing zero-area polygon yields empty mask", InterchangeWarning)
        return np.zeros((h, w), dtype=bool)
    return _winding_grid(pts, float(x0), float(y0), w, h) != 0


def rasterize(polygon, width: int, height: int) -> BinaryMask:
    """Rasterize a polygon over a full image grid (nonzero winding, center sampling)."""
    return BinaryMask(rasterize_window(polygon, 0, 0, width, height))
