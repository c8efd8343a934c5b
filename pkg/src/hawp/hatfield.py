"""Holistic attraction (HAT) field codec.

A lattice point ``p`` attracted by a segment is described by four numbers
``(d, theta, theta1, theta2)``: after moving the origin to ``p``, rotating by
``theta`` so the segment is vertical at ``x = d`` and scaling by ``d``, the
two endpoints sit at heights ``tan(theta1) > 0`` and ``tan(theta2) <= 0``.
The segment is recovered in closed form::

    x_i = p + d * R(theta) @ (1, tan(theta_i))

Which endpoint comes out first is fixed by this geometry (the one above the
foot of the perpendicular), so round trips preserve segments up to endpoint
order.

Fields live on the stride-``s`` lattice. Segment coordinates are divided by
the stride before encoding and decoded endpoints are multiplied back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from hawp.errors import DegenerateEncoding, EmptyWireframe, InvalidParameters, ShapeMismatch
from hawp.geometry import LineSegment, Point2, Wireframe, _as_point, project_points

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi

DEFAULT_STRIDE = 4
DEFAULT_TAU_D = 5.0
DEFAULT_D_MIN = 0.05
DEFAULT_SCALES = (-2, -1, 0, 1, 2)

PLANE_NAMES = ("d", "delta_d", "theta", "theta1", "theta2", "mask")


@dataclass
class HatField:
    """Normalised HAT planes on the ``height_s x width_s`` lattice.

    Every plane holds values in ``[0, 1]``; background pixels hold zeros.
    """

    width_s: int
    height_s: int
    stride: int
    tau_d: float
    d: np.ndarray
    delta_d: np.ndarray
    theta: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        shape = (self.height_s, self.width_s)
        for name in PLANE_NAMES:
            plane = np.asarray(getattr(self, name))
            if plane.shape != shape:
                raise ShapeMismatch(f"plane {name!r} has shape {plane.shape}, expected {shape}")
            setattr(self, name, plane)

    @classmethod
    def empty(cls, width_s: int, height_s: int, stride: int = DEFAULT_STRIDE,
              tau_d: float = DEFAULT_TAU_D, dtype=np.float32) -> "HatField":
        planes = {name: np.zeros((height_s, width_s), dtype=dtype) for name in PLANE_NAMES}
        return cls(width_s, height_s, stride, float(tau_d), **planes)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height_s, self.width_s)

    def planes(self) -> list[np.ndarray]:
        return [getattr(self, name) for name in PLANE_NAMES]

    def foreground(self) -> np.ndarray:
        return self.mask > 0.5

    def copy(self) -> "HatField":
        return HatField(self.width_s, self.height_s, self.stride, self.tau_d,
                        *(p.copy() for p in self.planes()))


@dataclass
class RegionLabels:
    labels: np.ndarray
    distances: np.ndarray

    def foreground(self) -> np.ndarray:
        return self.labels >= 0


class FieldDecoding(NamedTuple):
    """Output of :func:`decode_field`.

    ``lines`` are ``[x1, y1, x2, y2]`` in image coordinates, ``origins`` the
    lattice point ``(x, y)`` each line was decoded from and ``scales`` the
    residual multiplier used. ``skipped`` counts (pixel, scale) pairs whose
    rectified distance or angles fell outside the valid ranges.
    """

    lines: np.ndarray
    origins: np.ndarray
    scales: np.ndarray
    skipped: int

    def segments(self) -> list[tuple[LineSegment, Point2]]:
        return [
            (LineSegment.from_coords(*ln), Point2(float(o[0]), float(o[1])))
            for ln, o in zip(self.lines, self.origins)
        ]


def lattice_shape(width: int, height: int, stride: int) -> tuple[int, int]:
    """``(width_s, height_s)`` of the stride lattice covering a ``width x height`` image."""
    return math.ceil(width / stride), math.ceil(height / stride)


# --- normalisation ---------------------------------------------------------

def normalize(params, tau_d: float) -> np.ndarray:
    """Map ``(..., 4)`` raw ``(d, theta, theta1, theta2)`` into ``[0, 1]``."""
    params = np.asarray(params, dtype=np.float64)
    out = np.empty_like(params)
    out[..., 0] = np.clip(params[..., 0] / tau_d, 0.0, 1.0)
    out[..., 1] = params[..., 1] / TWO_PI + 0.5
    out[..., 2] = params[..., 2] / HALF_PI
    out[..., 3] = params[..., 3] / HALF_PI + 1.0
    return out


def denormalize(values, tau_d: float) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    out[..., 0] = values[..., 0] * tau_d
    out[..., 1] = (values[..., 1] - 0.5) * TWO_PI
    out[..., 2] = values[..., 2] * HALF_PI
    out[..., 3] = (values[..., 3] - 1.0) * HALF_PI
    return out


# --- point codec -----------------------------------------------------------

def encode_points(pts, segs) -> np.ndarray:
    """Encode ``(K, 2)`` points against their ``(K, 4)`` segments.

    Returns ``(K, 4)`` raw parameters. No validity checks: callers must make
    sure every foot is interior and every distance positive.
    """
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    segs = np.asarray(segs, dtype=np.float64).reshape(-1, 4)
    foot, _, _ = project_points(pts, segs)
    ux = foot[:, 0] - pts[:, 0]
    uy = foot[:, 1] - pts[:, 1]
    d = np.sqrt(ux * ux + uy * uy)
    theta = np.arctan2(uy, ux)
    theta = np.where(theta >= math.pi, theta - TWO_PI, theta)
    # unit vector of the rotated vertical axis
    vx = -uy / d
    vy = ux / d
    ha = (segs[:, 0] - pts[:, 0]) * vx + (segs[:, 1] - pts[:, 1]) * vy
    hb = (segs[:, 2] - pts[:, 0]) * vx + (segs[:, 3] - pts[:, 1]) * vy
    hi = np.maximum(ha, hb)
    lo = np.minimum(ha, hb)
    return np.stack([d, theta, np.arctan(hi / d), np.arctan(lo / d)], axis=1)


def decode_points(pts, params) -> np.ndarray:
    """Closed-form inverse of :func:`encode_points`; returns ``(K, 4)`` segments."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    params = np.asarray(params, dtype=np.float64).reshape(-1, 4)
    d, theta, t1, t2 = params.T
    c, s = np.cos(theta), np.sin(theta)
    tan1, tan2 = np.tan(t1), np.tan(t2)
    x1 = pts[:, 0] + d * (c - s * tan1)
    y1 = pts[:, 1] + d * (s + c * tan1)
    x2 = pts[:, 0] + d * (c - s * tan2)
    y2 = pts[:, 1] + d * (s + c * tan2)
    return np.stack([x1, y1, x2, y2], axis=1)


def encode_point(p, seg: LineSegment) -> tuple[float, float, float, float]:
    """HAT parameters of ``p`` with respect to ``seg``.

    Raises:
        DegenerateEncoding: if ``p`` lies on the segment's line or its
            perpendicular foot is not strictly between the endpoints.
    """
    p = _as_point(p)
    foot, dist, interior = project_points(np.array(p), seg.as_array())
    if not interior:
        raise DegenerateEncoding(f"foot of {p} is not interior to the segment")
    if not dist > 0.0:
        raise DegenerateEncoding(f"{p} lies on the segment")
    d, theta, t1, t2 = encode_points(np.array(p), seg.as_array())[0]
    if not (0.0 < t1 < HALF_PI) or not (-HALF_PI < t2 <= 0.0):
        raise DegenerateEncoding(f"angles out of range for {p}: ({t1}, {t2})")
    return float(d), float(theta), float(t1), float(t2)


def _check_params(v) -> tuple[float, float, float, float]:
    d, theta, t1, t2 = (float(x) for x in v)
    if not d > 0.0:
        raise InvalidParameters(f"distance must be positive, got {d}")
    if not 0.0 < t1 < HALF_PI:
        raise InvalidParameters(f"theta1 must lie in (0, pi/2), got {t1}")
    if not -HALF_PI < t2 <= 0.0:
        raise InvalidParameters(f"theta2 must lie in (-pi/2, 0], got {t2}")
    return d, theta, t1, t2


def decode_point(p, v) -> LineSegment:
    p = _as_point(p)
    d, theta, t1, t2 = _check_params(v)
    c, s = math.cos(theta), math.sin(theta)
    ta, tb = math.tan(t1), math.tan(t2)
    return LineSegment.from_coords(
        p.x + d * (c - s * ta),
        p.y + d * (s + c * ta),
        p.x + d * (c - s * tb),
        p.y + d * (s + c * tb),
    )


def decode_jacobian(p, v) -> np.ndarray:
    """Jacobian of ``(x1.x, x1.y, x2.x, x2.y)`` w.r.t. ``(d, theta, theta1, theta2)``."""
    d, theta, t1, t2 = _check_params(v)
    if HALF_PI - t1 < 1e-6 or t2 + HALF_PI < 1e-6:
        raise InvalidParameters("angles too close to +-pi/2 for a stable Jacobian")
    c, s = math.cos(theta), math.sin(theta)
    jac = np.zeros((4, 4))
    for row, (t, col) in enumerate(((t1, 2), (t2, 3))):
        tn = math.tan(t)
        sec2 = 1.0 + tn * tn
        r = 2 * row
        jac[r, 0] = c - s * tn
        jac[r + 1, 0] = s + c * tn
        jac[r, 1] = d * (-s - c * tn)
        jac[r + 1, 1] = d * (c - s * tn)
        jac[r, col] = -d * s * sec2
        jac[r + 1, col] = d * c * sec2
    return jac


# --- attraction regions ----------------------------------------------------

def _lattice_points(width_s: int, height_s: int) -> np.ndarray:
    ys, xs = np.mgrid[0:height_s, 0:width_s]
    return np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)


def assign_regions(
    wf: Wireframe,
    width_s: int,
    height_s: int,
    tau_d: float = DEFAULT_TAU_D,
    d_min: float = DEFAULT_D_MIN,
    stride: int = DEFAULT_STRIDE,
) -> RegionLabels:
    """Label each lattice point with its attracting segment (or -1).

    A point is foreground when its nearest segment (ties to the lower index)
    is within ``[d_min, tau_d]`` and the perpendicular foot is interior.
    """
    if not wf.segments:
        raise EmptyWireframe("cannot assign regions for an empty wireframe")
    segs = wf.segment_array() / stride
    pts = _lattice_points(width_s, height_s)
    best = np.full(len(pts), np.inf)
    label = np.full(len(pts), -1, dtype=np.int64)
    inside = np.zeros(len(pts), dtype=bool)
    for k, seg in enumerate(segs):
        _, dist, interior = project_points(pts, seg)
        better = dist < best
        best[better] = dist[better]
        label[better] = k
        inside[better] = interior[better]
    fg = inside & (best <= tau_d) & (best >= d_min)
    labels = np.where(fg, label, -1).reshape(height_s, width_s)
    return RegionLabels(labels, best.reshape(height_s, width_s))


# --- field codec -----------------------------------------------------------

def encode_field(
    wf: Wireframe,
    stride: int = DEFAULT_STRIDE,
    tau_d: float = DEFAULT_TAU_D,
    d_min: float = DEFAULT_D_MIN,
    dtype=np.float32,
) -> HatField:
    """Ground-truth HAT field of ``wf`` on its stride lattice."""
    width_s, height_s = lattice_shape(wf.width, wf.height, stride)
    regions = assign_regions(wf, width_s, height_s, tau_d, d_min, stride)
    field = HatField.empty(width_s, height_s, stride, tau_d, dtype=dtype)
    fg = regions.labels.ravel() >= 0
    if not fg.any():
        return field
    pts = _lattice_points(width_s, height_s)[fg]
    segs = wf.segment_array()[regions.labels.ravel()[fg]] / stride
    values = normalize(encode_points(pts, segs), tau_d)
    for k, name in enumerate(("d", "theta", "theta1", "theta2")):
        getattr(field, name).ravel()[fg] = values[:, k]
    field.mask.ravel()[fg] = 1
    return field


def rectified_distances(d, delta_d, scales: Sequence[int]) -> np.ndarray:
    """Normalised distance maps ``d + i * delta_d`` for each scale ``i``, stacked on axis 0."""
    d = np.asarray(d, dtype=np.float64)
    delta_d = np.asarray(delta_d, dtype=np.float64)
    return np.stack([d + i * delta_d for i in scales])


def decode_field(f: HatField, scales: Sequence[int] = DEFAULT_SCALES) -> FieldDecoding:
    """Decode every foreground pixel at every residual scale into image-space lines."""
    fg = f.foreground().ravel()
    pts = _lattice_points(f.width_s, f.height_s)[fg]
    base = np.stack(
        [f.d.ravel()[fg], f.theta.ravel()[fg], f.theta1.ravel()[fg], f.theta2.ravel()[fg]], axis=1
    ).astype(np.float64)
    delta = f.delta_d.ravel()[fg].astype(np.float64)
    angles_ok = (
        np.isfinite(base).all(axis=1)
        & (base[:, 2] > 0.0) & (base[:, 2] < 1.0)
        & (base[:, 3] > 0.0) & (base[:, 3] <= 1.0)
    )
    lines, origins, used, skipped = [], [], [], 0
    for i in scales:
        dn = base[:, 0] + i * delta
        ok = angles_ok & np.isfinite(dn) & (dn > 0.0)
        skipped += int(len(dn) - ok.sum())
        vals = base[ok].copy()
        vals[:, 0] = np.minimum(dn[ok], 1.0)
        raw = denormalize(vals, f.tau_d)
        lines.append(decode_points(pts[ok], raw) * f.stride)
        origins.append(pts[ok])
        used.append(np.full(int(ok.sum()), i, dtype=np.int64))
    if not lines:
        return FieldDecoding(np.zeros((0, 4)), np.zeros((0, 2)), np.zeros(0, dtype=np.int64), 0)
    return FieldDecoding(np.concatenate(lines), np.concatenate(origins), np.concatenate(used), skipped)


def merge_duplicate_lines(lines, tol: float, scores=None) -> tuple[np.ndarray, np.ndarray]:
    """Collapse lines whose endpoints agree within ``tol`` (either endpoint order).

    Returns ``(kept_indices, merged_scores)``; each cluster is represented by
    its lowest index and carries the cluster's maximum score.
    """
    lines = np.asarray(lines, dtype=np.float64).reshape(-1, 4)
    n = len(lines)
    if scores is None:
        scores = np.ones(n)
    scores = np.asarray(scores, dtype=np.float64)
    if n == 0 or tol <= 0:
        return np.arange(n), scores.copy()
    tree = cKDTree(lines)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    swapped = lines[:, [2, 3, 0, 1]]
    extra = [(i, j) for i, js in enumerate(tree.query_ball_point(swapped, tol)) for j in js if j != i]
    if extra:
        pairs = np.concatenate([pairs.reshape(-1, 2), np.array(extra)])
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    _, comp = connected_components(graph, directed=False)
    order = np.argsort(comp, kind="stable")
    first = np.ones(n, dtype=bool)
    first[1:] = comp[order][1:] != comp[order][:-1]
    reps = np.sort(order[first])
    best = np.full(comp.max() + 1, -np.inf)
    np.maximum.at(best, comp, scores)
    return reps, best[comp[reps]]
