"""Planar primitives: points, segments, lines, homographies and wireframes.

Scalar helpers (``project_to_segment``, ``structural_distance`` ...) operate on
the small immutable types below; the ``*_matrix`` / array variants take
``(N, 4)`` segment arrays laid out as ``[x1, y1, x2, y2]`` and are what the
heavier modules use internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from hawp.errors import DegenerateHomography, DegeneratePoint, InvalidParameters

W_EPS = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


def _as_point(p) -> Point2:
    if isinstance(p, Point2):
        return p
    x, y = p
    return Point2(float(x), float(y))


@dataclass(frozen=True)
class LineSegment:
    x1: Point2
    x2: Point2
    score: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x1", _as_point(self.x1))
        object.__setattr__(self, "x2", _as_point(self.x2))
        object.__setattr__(self, "score", float(self.score))
        coords = (*self.x1, *self.x2)
        if not all(math.isfinite(c) for c in coords):
            raise InvalidParameters(f"non-finite segment coordinates {coords}")
        if self.length() <= 0.0:
            raise InvalidParameters(f"zero-length segment at {self.x1}")

    @classmethod
    def from_coords(cls, x1: float, y1: float, x2: float, y2: float, score: float = 1.0) -> "LineSegment":
        return cls(Point2(float(x1), float(y1)), Point2(float(x2), float(y2)), score)

    def length(self) -> float:
        dx = self.x2.x - self.x1.x
        dy = self.x2.y - self.x1.y
        return math.sqrt(dx * dx + dy * dy)

    def as_array(self) -> np.ndarray:
        return np.array([self.x1.x, self.x1.y, self.x2.x, self.x2.y], dtype=np.float64)

    def reversed(self) -> "LineSegment":
        return LineSegment(self.x2, self.x1, self.score)

    def line(self) -> "Line":
        return Line.from_segment(self)


@dataclass(frozen=True)
class Line:
    """Infinite line ``a . x + b = 0`` with unit normal ``a``.

    The normal's sign is canonical: its first nonzero component is positive.
    """

    a: tuple[float, float]
    b: float

    @classmethod
    def from_segment(cls, seg: LineSegment) -> "Line":
        dx = seg.x2.x - seg.x1.x
        dy = seg.x2.y - seg.x1.y
        n = math.sqrt(dx * dx + dy * dy)
        ax, ay = -dy / n, dx / n
        if ax < 0 or (ax == 0 and ay < 0):
            ax, ay = -ax, -ay
        b = -(ax * seg.x1.x + ay * seg.x1.y)
        return cls((ax, ay), b)

    def signed_distance(self, p) -> float:
        p = _as_point(p)
        return self.a[0] * p.x + self.a[1] * p.y + self.b


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective transform, stored with ``m[2, 2] == 1`` whenever possible."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise DegenerateHomography("homography has non-finite entries")
        if abs(m[2, 2]) > W_EPS:
            m = m / m[2, 2]
        det = np.linalg.det(m)
        if not math.isfinite(det) or abs(det) < 1e-12 * max(1.0, np.abs(m).max() ** 3):
            raise DegenerateHomography(f"singular homography (det={det:g})")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "Homography":
        return cls(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))

    @classmethod
    def rotation(cls, angle: float, center=(0.0, 0.0)) -> "Homography":
        c, s = math.cos(angle), math.sin(angle)
        cx, cy = center
        return cls(
            np.array(
                [
                    [c, -s, cx - c * cx + s * cy],
                    [s, c, cy - s * cx - c * cy],
                    [0.0, 0.0, 1.0],
                ]
            )
        )

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def __matmul__(self, other: "Homography") -> "Homography":
        """``(self @ other)`` applies ``other`` first."""
        return Homography(self.m @ other.m)

    def __eq__(self, other):
        if not isinstance(other, Homography):
            return NotImplemented
        return bool(np.array_equal(self.m, other.m))

    def __hash__(self):
        return hash(self.m.tobytes())

    def apply(self, pts) -> np.ndarray:
        """Map an ``(N, 2)`` array of points; raises DegeneratePoint on w ~ 0."""
        out, w = self._apply_with_w(pts)
        if np.any(np.abs(w) < W_EPS):
            raise DegeneratePoint("point maps to the line at infinity")
        return out

    def _apply_with_w(self, pts) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        m = self.m
        x = m[0, 0] * pts[:, 0] + m[0, 1] * pts[:, 1] + m[0, 2]
        y = m[1, 0] * pts[:, 0] + m[1, 1] * pts[:, 1] + m[1, 2]
        w = m[2, 0] * pts[:, 0] + m[2, 1] * pts[:, 1] + m[2, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.stack([x / w, y / w], axis=1)
        return out, w

    def to_dict(self) -> dict:
        return {"matrix": self.m.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Homography":
        return cls(np.array(d["matrix"], dtype=np.float64))


@dataclass
class Wireframe:
    width: int
    height: int
    segments: list[LineSegment] = field(default_factory=list)
    junctions: list[tuple[Point2, float]] = field(default_factory=list)

    def __post_init__(self):
        self.width = int(self.width)
        self.height = int(self.height)
        self.junctions = [(_as_point(p), float(s)) for p, s in self.junctions]

    @classmethod
    def from_arrays(
        cls,
        width: int,
        height: int,
        segments,
        scores=None,
        junctions=None,
        junction_scores=None,
    ) -> "Wireframe":
        segs = np.asarray(segments, dtype=np.float64).reshape(-1, 4)
        if scores is None:
            scores = np.ones(len(segs))
        lines = [LineSegment.from_coords(*s, score=c) for s, c in zip(segs, scores)]
        juncs = []
        if junctions is not None:
            jpts = np.asarray(junctions, dtype=np.float64).reshape(-1, 2)
            if junction_scores is None:
                junction_scores = np.ones(len(jpts))
            juncs = [(Point2(float(x), float(y)), float(c)) for (x, y), c in zip(jpts, junction_scores)]
        return cls(width, height, lines, juncs)

    def segment_array(self) -> np.ndarray:
        if not self.segments:
            return np.zeros((0, 4))
        return np.array([[s.x1.x, s.x1.y, s.x2.x, s.x2.y] for s in self.segments], dtype=np.float64)

    def segment_scores(self) -> np.ndarray:
        return np.array([s.score for s in self.segments], dtype=np.float64)

    def junction_array(self) -> np.ndarray:
        if not self.junctions:
            return np.zeros((0, 2))
        return np.array([[p.x, p.y] for p, _ in self.junctions], dtype=np.float64)

    def junction_scores(self) -> np.ndarray:
        return np.array([s for _, s in self.junctions], dtype=np.float64)

    def unique_endpoints(self) -> np.ndarray:
        """Distinct segment endpoints in first-seen order, shape ``(K, 2)``."""
        seen = {}
        for s in self.segments:
            for p in (s.x1, s.x2):
                seen.setdefault((p.x, p.y), None)
        if not seen:
            return np.zeros((0, 2))
        return np.array(list(seen), dtype=np.float64)

    def with_endpoint_junctions(self, tol: float = 0.0) -> "Wireframe":
        """Copy whose junctions are the segment endpoints.

        With ``tol > 0`` endpoints closer than ``tol`` are merged, keeping
        the first one seen.
        """
        pts = self.unique_endpoints()
        if tol > 0 and len(pts) > 1:
            from scipy.sparse import coo_matrix
            from scipy.sparse.csgraph import connected_components
            from scipy.spatial import cKDTree

            pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
            adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(pts), len(pts)))
            _, label = connected_components(adj, directed=False)
            _, first = np.unique(label, return_index=True)
            pts = pts[np.sort(first)]
        return Wireframe(self.width, self.height, list(self.segments), [(Point2(*p), 1.0) for p in pts])

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "segments": [[s.x1.x, s.x1.y, s.x2.x, s.x2.y, s.score] for s in self.segments],
            "junctions": [[p.x, p.y, c] for p, c in self.junctions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Wireframe":
        segs = []
        for row in d.get("segments", []):
            score = row[4] if len(row) > 4 else 1.0
            segs.append(LineSegment.from_coords(*row[:4], score=score))
        juncs = []
        for row in d.get("junctions", []):
            score = row[2] if len(row) > 2 else 1.0
            juncs.append((Point2(float(row[0]), float(row[1])), float(score)))
        return cls(int(d["width"]), int(d["height"]), segs, juncs)


def project_to_segment(p, seg: LineSegment) -> tuple[Point2, float, bool]:
    """Closest point on ``seg`` to ``p``.

    Returns ``(foot, distance, interior)``. ``interior`` is true when the
    perpendicular foot falls strictly between the endpoints; otherwise the
    foot is clamped to the nearer endpoint.
    """
    p = _as_point(p)
    x1, y1 = seg.x1
    x2, y2 = seg.x2
    dx = x2 - x1
    dy = y2 - y1
    t = ((p.x - x1) * dx + (p.y - y1) * dy) / (dx * dx + dy * dy)
    interior = 0.0 < t < 1.0
    if t <= 0.0:
        fx, fy = x1, y1
    elif t >= 1.0:
        fx, fy = x2, y2
    else:
        fx, fy = x1 + t * dx, y1 + t * dy
    ex = p.x - fx
    ey = p.y - fy
    return Point2(fx, fy), math.sqrt(ex * ex + ey * ey), interior


def project_points(pts, segs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised ``project_to_segment`` with broadcasting.

    ``pts[..., 2]`` and ``segs[..., 4]`` broadcast against each other; returns
    ``(foot[..., 2], distance[...], interior[...])``. The arithmetic follows
    the scalar version operation for operation so results agree bitwise.
    """
    pts = np.asarray(pts, dtype=np.float64)
    segs = np.asarray(segs, dtype=np.float64)
    px, py = pts[..., 0], pts[..., 1]
    x1, y1, x2, y2 = segs[..., 0], segs[..., 1], segs[..., 2], segs[..., 3]
    dx = x2 - x1
    dy = y2 - y1
    t = ((px - x1) * dx + (py - y1) * dy) / (dx * dx + dy * dy)
    interior = (t > 0.0) & (t < 1.0)
    fx = np.where(t <= 0.0, x1, np.where(t >= 1.0, x2, x1 + t * dx))
    fy = np.where(t <= 0.0, y1, np.where(t >= 1.0, y2, y1 + t * dy))
    ex = px - fx
    ey = py - fy
    dist = np.sqrt(ex * ex + ey * ey)
    return np.stack([fx, fy], axis=-1), dist, interior


def structural_distance(a: LineSegment, b: LineSegment) -> float:
    """Half the smaller of the two endpoint-pairing sums of Euclidean distances."""
    same = math.dist(a.x1, b.x1) + math.dist(a.x2, b.x2)
    swap = math.dist(a.x1, b.x2) + math.dist(a.x2, b.x1)
    return 0.5 * min(same, swap)


def orthogonal_distance(a: LineSegment, b: LineSegment) -> float:
    """Mean-style orthogonal distance: each endpoint projected onto the other segment."""
    total = 0.0
    for p in (a.x1, a.x2):
        total += project_to_segment(p, b)[1]
    for p in (b.x1, b.x2):
        total += project_to_segment(p, a)[1]
    return 0.5 * total


def structural_distance_matrix(a, b) -> np.ndarray:
    """Pairwise structural distances between ``(N, 4)`` and ``(M, 4)`` arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(1, -1, 4)
    d11 = np.hypot(a[..., 0] - b[..., 0], a[..., 1] - b[..., 1])
    d22 = np.hypot(a[..., 2] - b[..., 2], a[..., 3] - b[..., 3])
    d12 = np.hypot(a[..., 0] - b[..., 2], a[..., 1] - b[..., 3])
    d21 = np.hypot(a[..., 2] - b[..., 0], a[..., 3] - b[..., 1])
    return 0.5 * np.minimum(d11 + d22, d12 + d21)


def orthogonal_distance_matrix(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    A = a[:, None, :]
    B = b[None, :, :]
    total = project_points(A[..., 0:2], B)[1] + project_points(A[..., 2:4], B)[1]
    total = total + project_points(B[..., 0:2], A)[1] + project_points(B[..., 2:4], A)[1]
    return 0.5 * total


def squared_endpoint_distance_matrix(a, b) -> np.ndarray:
    """min over pairings of the summed squared endpoint distances (sAP overlap)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(1, -1, 4)
    same = (a[..., 0] - b[..., 0]) ** 2 + (a[..., 1] - b[..., 1]) ** 2
    same = same + (a[..., 2] - b[..., 2]) ** 2 + (a[..., 3] - b[..., 3]) ** 2
    swap = (a[..., 0] - b[..., 2]) ** 2 + (a[..., 1] - b[..., 3]) ** 2
    swap = swap + (a[..., 2] - b[..., 0]) ** 2 + (a[..., 3] - b[..., 1]) ** 2
    return np.minimum(same, swap)


def apply_homography(h: Homography, p) -> Point2:
    x, y = _as_point(p)
    m = h.m
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) < W_EPS:
        raise DegeneratePoint(f"w-component {w:g} at ({x}, {y})")
    return Point2(
        (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w,
        (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w,
    )


def clip_segment(seg, width: float, height: float):
    """Liang-Barsky clip of ``[x1, y1, x2, y2]`` to ``[0, width] x [0, height]``.

    Boundaries are inclusive. Returns the clipped coordinates or ``None`` if
    nothing of positive length remains.
    """
    x1, y1, x2, y2 = (float(v) for v in seg)
    dx = x2 - x1
    dy = y2 - y1
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x1), (dx, width - x1), (-dy, y1), (dy, height - y1)):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    if t1 <= t0:
        return None
    out = (x1 + t0 * dx, y1 + t0 * dy, x1 + t1 * dx, y1 + t1 * dy)
    if out[0] == out[2] and out[1] == out[3]:
        return None
    return out


def warp_wireframe(h: Homography, wf: Wireframe, out_size: tuple[int, int]) -> Wireframe:
    """Map ``wf`` through ``h`` and clip it to an ``(width, height)`` canvas.

    Segments crossing the line at infinity have no bounded image and are
    dropped, as are segments and junctions that end up outside the canvas.
    """
    width, height = out_size
    segs = wf.segment_array()
    out_segs = []
    if len(segs):
        p1, w1 = h._apply_with_w(segs[:, 0:2])
        p2, w2 = h._apply_with_w(segs[:, 2:4])
        ok = (np.abs(w1) >= W_EPS) & (np.abs(w2) >= W_EPS) & (np.sign(w1) == np.sign(w2))
        for i in np.flatnonzero(ok):
            clipped = clip_segment((*p1[i], *p2[i]), width, height)
            if clipped is not None:
                out_segs.append(LineSegment.from_coords(*clipped, score=wf.segments[i].score))
    out_juncs = []
    if wf.junctions:
        jp, jw = h._apply_with_w(wf.junction_array())
        for (x, y), w, (_, score) in zip(jp, jw, wf.junctions):
            if abs(w) >= W_EPS and 0.0 <= x <= width and 0.0 <= y <= height:
                out_juncs.append((Point2(float(x), float(y)), score))
    return Wireframe(width, height, out_segs, out_juncs)


def scale_wireframe(wf: Wireframe, sx: float, sy: float, size: tuple[int, int] | None = None) -> Wireframe:
    segs = wf.segment_array() * np.array([sx, sy, sx, sy])
    juncs = wf.junction_array() * np.array([sx, sy])
    width, height = size if size is not None else (round(wf.width * sx), round(wf.height * sy))
    keep = [i for i, s in enumerate(segs) if s[0] != s[2] or s[1] != s[3]]
    return Wireframe.from_arrays(
        width,
        height,
        segs[keep],
        wf.segment_scores()[keep] if len(segs) else None,
        juncs,
        wf.junction_scores(),
    )


def segments_to_array(segments: Iterable[LineSegment] | np.ndarray) -> np.ndarray:
    """Accept a list of LineSegment or any ``(N, 4)`` array-like."""
    if isinstance(segments, np.ndarray):
        return segments.astype(np.float64, copy=False).reshape(-1, 4)
    segments = list(segments)
    if not segments:
        return np.zeros((0, 4))
    if isinstance(segments[0], LineSegment):
        return np.array([s.as_array() for s in segments])
    return np.asarray(segments, dtype=np.float64).reshape(-1, 4)


def points_to_array(points: Sequence | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalise junction-like inputs to ``(xy[K, 2], scores[K])``.

    Accepts ``[(Point2, score), ...]``, ``[Point2, ...]`` or arrays of shape
    ``(K, 2)`` / ``(K, 3)``.
    """
    if isinstance(points, np.ndarray):
        arr = points.astype(np.float64, copy=False)
        if arr.size == 0:
            return np.zeros((0, 2)), np.zeros(0)
        if arr.shape[-1] == 3:
            return arr[:, :2], arr[:, 2]
        return arr.reshape(-1, 2), np.ones(len(arr.reshape(-1, 2)))
    points = list(points)
    if not points:
        return np.zeros((0, 2)), np.zeros(0)
    first = points[0]
    if len(first) == 2 and not isinstance(first[0], (int, float, np.floating, np.integer)):
        xy = np.array([[p[0], p[1]] for p, _ in points], dtype=np.float64)
        sc = np.array([s for _, s in points], dtype=np.float64)
        return xy, sc
    arr = np.asarray(points, dtype=np.float64)
    if arr.shape[-1] == 3:
        return arr[:, :2], arr[:, 2]
    return arr, np.ones(len(arr))
