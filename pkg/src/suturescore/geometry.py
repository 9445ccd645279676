"""Low-level 2-D geometry: contour tracing, convex hull, minimum-area rectangle, PCA.

Unit vectors are plain numpy arrays of shape (2,).  Functions returning a
direction fix its sign so that x >= 0 (and y >= 0 when x == 0), which makes
every orientation deterministic.  Angles come from atan2 of cross and dot
products; where a plain arccos is wanted, its argument is clamped to [-1, 1]
first.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


class GeometryError(ValueError):
    """Raised for inputs violating a geometric precondition."""


class DegenerateGeometryError(GeometryError):
    """Raised when the input is too degenerate to fit (collinear, coincident)."""


class GeometryWarning(UserWarning):
    """Non-fatal geometric ambiguity (isotropic point cloud, exact ties, ...)."""


def unit(v) -> np.ndarray:
    """Normalize a 2-vector; raises on zero length."""
    v = np.asarray(v, dtype=float)
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        raise DegenerateGeometryError("cannot normalize a zero vector")
    return v / n


def perp(v) -> np.ndarray:
    """Counter-clockwise perpendicular of a 2-vector."""
    v = np.asarray(v, dtype=float)
    return np.array([-v[1], v[0]])


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    """Fix the sign of a direction so x >= 0 (tie: y >= 0)."""
    if v[0] < 0.0 or (v[0] == 0.0 and v[1] < 0.0):
        return -v
    return v


def clamped_arccos_deg(dot: float) -> float:
    """arccos in degrees with the argument clamped to [-1, 1]."""
    return math.degrees(math.acos(min(1.0, max(-1.0, dot))))


def angle_between_deg(u, v) -> float:
    """Angle between two vectors in degrees, in [0, 180].

    Evaluated as atan2(|cross|, dot), which is exact near 0 and 180 degrees
    where arccos of a clamped dot product loses precision.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    cross = abs(u[0] * v[1] - u[1] * v[0])
    dot = u[0] * v[0] + u[1] * v[1]
    return math.degrees(math.atan2(cross, dot))


# Moore neighborhood in (dr, dc), clockwise on screen starting East.
_DIRS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))


def _trace_outer_border(grid: list[list[bool]], start: tuple[int, int],
                        limit: int) -> list[tuple[int, int]]:
    """Follow the outer border of the 8-connected component containing ``start``.

    ``grid`` is a nested-list boolean window with a one-pixel background
    margin; ``start`` must be the component's first pixel in row-major scan
    order, so its west neighbor is background.  Uses Moore-neighbor tracing
    and stops when the start pixel is re-entered with the same initial move
    (Jacob's criterion).  An isolated pixel yields a single-point border.
    """
    path = [start]
    r, c = start
    backtrack = 4  # direction index from current pixel to a known background pixel
    first_move = None
    dirs = _DIRS
    for _ in range(limit):
        found = None
        for k in range(1, 9):
            d = (backtrack + k) % 8
            if grid[r + dirs[d][0]][c + dirs[d][1]]:
                found = (d, k)
                break
        if found is None:
            return path  # isolated pixel
        d, k = found
        if (r, c) == start:
            if first_move is None:
                first_move = d
            elif d == first_move:
                return path[:-1]  # drop the duplicated start appended on re-entry
        prev_d = (backtrack + k - 1) % 8  # last background pixel checked
        bg_r, bg_c = r + dirs[prev_d][0], c + dirs[prev_d][1]
        r, c = r + dirs[d][0], c + dirs[d][1]
        backtrack = dirs.index((bg_r - r, bg_c - c))
        path.append((r, c))
    raise GeometryError("border following did not terminate")


def trace_contours(mask) -> list[np.ndarray]:
    """Outer borders of each 8-connected foreground component of a binary mask.

    Returns one (k, 2) float array of (x, y) pixel-center coordinates per
    component, vertices in traversal order.  An empty mask yields an empty
    list.
    """
    pixels = np.asarray(getattr(mask, "pixels", mask), dtype=bool)
    if not pixels.any():
        return []
    padded = np.zeros((pixels.shape[0] + 2, pixels.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = pixels
    labels, _ = ndimage.label(padded, structure=np.ones((3, 3), dtype=int))
    contours = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        r0, c0 = sl[0].start - 1, sl[1].start - 1
        window = labels[r0 : sl[0].stop + 1, c0 : sl[1].stop + 1] == idx
        flat = int(window.reshape(-1).argmax())  # first set pixel in scan order
        start = divmod(flat, window.shape[1])
        border = _trace_outer_border(
            window.tolist(), start, 8 * int(window.sum()) + 8
        )
        arr = np.asarray(border, dtype=float)
        pts = np.empty_like(arr)
        pts[:, 0] = arr[:, 1] + (c0 - 1 + 0.5)  # x from padded column
        pts[:, 1] = arr[:, 0] + (r0 - 1 + 0.5)  # y from padded row
        contours.append(pts)
    return contours


def convex_hull(points) -> np.ndarray:
    """Counter-clockwise convex hull with no three consecutive collinear vertices.

    Coincident or collinear inputs yield a degenerate hull of fewer than
    three vertices; ``min_area_rect`` rejects those.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 1:
        raise GeometryError("need an (n, 2) array with n >= 1")
    pts = np.unique(pts, axis=0)  # lexicographic sort + dedup
    if len(pts) <= 2:
        return pts
    seq = [tuple(p) for p in pts.tolist()]

    def half(points):
        chain: list[tuple[float, float]] = []
        for p in points:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(seq)
    upper = half(seq[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return np.array(hull[:2]) if hull else pts[:1]
    return np.array(hull)


@dataclass(frozen=True)
class RotatedBox:
    """Minimum-area rectangle: center plus two perpendicular half-extent vectors.

    ``edge_w`` and ``edge_h`` run from the center to the midpoints of two
    adjacent faces, so the full side lengths are ``2 * |edge_w|`` and
    ``2 * |edge_h|``.  The corners are ``center +/- edge_w +/- edge_h``.
    Stored with ``|edge_w| >= |edge_h|`` and both sign-canonicalized.
    """

    center: tuple[float, float]
    edge_w: tuple[float, float]
    edge_h: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "edge_w", (float(self.edge_w[0]), float(self.edge_w[1])))
        object.__setattr__(self, "edge_h", (float(self.edge_h[0]), float(self.edge_h[1])))
        ew, eh = np.array(self.edge_w), np.array(self.edge_h)
        nw, nh = np.linalg.norm(ew), np.linalg.norm(eh)
        if nw == 0.0 or nh == 0.0:
            raise DegenerateGeometryError("rectangle edge vectors must be nonzero")
        if abs(float(ew @ eh)) > 1e-6 * nw * nh:
            raise GeometryError("rectangle edge vectors must be perpendicular")

    @property
    def width(self) -> float:
        """Full side length along edge_w."""
        return 2.0 * float(np.linalg.norm(self.edge_w))

    @property
    def height(self) -> float:
        """Full side length along edge_h."""
        return 2.0 * float(np.linalg.norm(self.edge_h))

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> np.ndarray:
        """The four corners in cyclic order, shape (4, 2)."""
        c = np.array(self.center)
        ew = np.array(self.edge_w)
        eh = np.array(self.edge_h)
        return np.array([c + ew + eh, c - ew + eh, c - ew - eh, c + ew - eh])


def _box_from_frame(center: np.ndarray, u: np.ndarray, half_u: float,
                    v: np.ndarray, half_v: float) -> RotatedBox:
    """Build a RotatedBox from an orthonormal frame, canonicalizing order and sign."""
    a = _canonical_sign(u) * half_u
    b = _canonical_sign(v) * half_v
    if half_u < half_v or (
        half_u == half_v and math.atan2(a[1], a[0]) > math.atan2(b[1], b[0])
    ):
        a, b = b, a
    return RotatedBox(center=(center[0], center[1]), edge_w=(a[0], a[1]), edge_h=(b[0], b[1]))


def min_area_rect(points) -> RotatedBox:
    """Minimum-area rectangle containing all points (rotating calipers).

    One side of the optimum is collinear with a convex-hull edge, so the
    search sweeps hull edges only.  Collinear or coincident input raises
    DegenerateGeometryError; callers typically drop such instances.
    """
    hull = convex_hull(points)
    if len(hull) < 3:
        raise DegenerateGeometryError(
            "min_area_rect needs at least 3 non-collinear points"
        )
    edges = np.diff(np.vstack([hull, hull[:1]]), axis=0)
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    dirs = edges / lengths[:, None]

    candidates = []
    for u, edge_len in zip(dirs, lengths):
        v = perp(u)
        proj_u = hull @ u
        proj_v = hull @ v
        lo_u, hi_u = proj_u.min(), proj_u.max()
        lo_v, hi_v = proj_v.min(), proj_v.max()
        area = (hi_u - lo_u) * (hi_v - lo_v)
        center = u * (lo_u + hi_u) / 2.0 + v * (lo_v + hi_v) / 2.0
        candidates.append(
            (area, edge_len, center, u.copy(), (hi_u - lo_u) / 2.0, v, (hi_v - lo_v) / 2.0)
        )

    # Several flush edges can tie on area (every edge of an acute triangle
    # does); preferring the longest flush edge keeps the choice invariant
    # under rotation and translation of the input.
    min_area = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= min_area * (1.0 + 1e-9)]
    _, _, center, u, half_u, v, half_v = max(tied, key=lambda c: c[1])
    if half_u == 0.0 or half_v == 0.0:
        raise DegenerateGeometryError("points are collinear; rectangle is degenerate")
    return _box_from_frame(center, u, half_u, v, half_v)


def principal_direction(points) -> np.ndarray:
    """First principal component of a 2-D point cloud, as a unit vector.

    The sign is fixed so x >= 0 (tie: y >= 0).  Near-isotropic clouds
    (eigenvalue ratio < 1.01) still return a direction but attach a
    GeometryWarning.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2 or len(np.unique(pts, axis=0)) < 2:
        raise DegenerateGeometryError("principal_direction needs >= 2 distinct points")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[0] > 0.0 and eigvals[1] / eigvals[0] < 1.01:
        warnings.warn(
            "point cloud is nearly isotropic; principal direction is unstable",
            GeometryWarning,
        )
    direction = eigvecs[:, int(np.argmax(eigvals))]
    return _canonical_sign(direction / np.linalg.norm(direction))
