"""Binding of dense line proposals to sparse junction proposals."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from hawp.errors import NoJunctions
from hawp.geometry import Point2, Wireframe, _as_point, points_to_array, segments_to_array

TAU_DELTA = 10.0
TAU_VER = 1.5
DEFAULT_UNITS = 4.0

_CHUNK = 4096


@dataclass(frozen=True)
class Proposal:
    """Endpoint-augmented line: bound junctions ``y1, y2`` plus the decoded ends ``x1, x2``.

    ``delta`` is the binding cost in squared (scaled) distance units.
    """

    y1: Point2
    y2: Point2
    x1: Point2
    x2: Point2
    delta: float
    score: float = 0.0

    def __post_init__(self):
        for name in ("y1", "y2", "x1", "x2"):
            object.__setattr__(self, name, _as_point(getattr(self, name)))

    def as_row(self) -> list[float]:
        return [*self.y1, *self.y2, *self.x1, *self.x2, self.delta, self.score]

    @classmethod
    def from_row(cls, row) -> "Proposal":
        r = [float(v) for v in row]
        score = r[9] if len(r) > 9 else 0.0
        return cls(Point2(r[0], r[1]), Point2(r[2], r[3]), Point2(r[4], r[5]), Point2(r[6], r[7]), r[8], score)

    def with_score(self, score: float) -> "Proposal":
        return replace(self, score=float(score))


def nearest_junctions(pts: np.ndarray, juncs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive nearest neighbour, ties to the lowest junction index.

    Returns ``(index[N], squared_distance[N])``.
    """
    idx = np.empty(len(pts), dtype=np.int64)
    dist = np.empty(len(pts))
    for start in range(0, len(pts), _CHUNK):
        p = pts[start:start + _CHUNK]
        d2 = (p[:, None, 0] - juncs[None, :, 0]) ** 2 + (p[:, None, 1] - juncs[None, :, 1]) ** 2
        k = np.argmin(d2, axis=1)
        idx[start:start + _CHUNK] = k
        dist[start:start + _CHUNK] = d2[np.arange(len(p)), k]
    return idx, dist


def bind_arrays(lines, juncs, tau_delta: float = TAU_DELTA, units: float = DEFAULT_UNITS) -> dict[str, np.ndarray]:
    """Array core of :func:`bind`.

    Returns a dict with ``line_index``, ``j1``, ``j2`` and ``delta`` for the
    kept proposals, in order of first appearance of each junction pair.
    """
    lines = segments_to_array(lines)
    jxy, _ = points_to_array(juncs)
    if len(jxy) == 0:
        raise NoJunctions("binding needs at least one junction")
    scaled_j = jxy / units
    i1, d1 = nearest_junctions(lines[:, 0:2] / units, scaled_j)
    i2, d2 = nearest_junctions(lines[:, 2:4] / units, scaled_j)
    delta = np.maximum(d1, d2)
    ok = (delta <= tau_delta) & (i1 != i2)
    cand = np.flatnonzero(ok)
    best: dict[tuple[int, int], int] = {}
    for li in cand:
        key = (int(min(i1[li], i2[li])), int(max(i1[li], i2[li])))
        cur = best.get(key)
        if cur is None or delta[li] < delta[cur]:
            best[key] = li
    kept = np.array(sorted(best.values()), dtype=np.int64)
    return {
        "line_index": kept,
        "j1": i1[kept],
        "j2": i2[kept],
        "delta": delta[kept],
    }


def bind(lines, juncs, tau_delta: float = TAU_DELTA, units: float = DEFAULT_UNITS) -> list[Proposal]:
    """Anchor each line to the junctions nearest its endpoints.

    Distances are measured after dividing coordinates by ``units`` (the
    stride, by default). Lines whose worse endpoint is farther than
    ``tau_delta`` (squared), or whose ends snap to the same junction, are
    dropped; among lines sharing a junction pair the cheapest wins.
    """
    lines = segments_to_array(lines)
    jxy, _ = points_to_array(juncs)
    res = bind_arrays(lines, jxy, tau_delta, units)
    out = []
    for li, a, b, dl in zip(res["line_index"], res["j1"], res["j2"], res["delta"]):
        ln = lines[li]
        out.append(Proposal(Point2(*jxy[a]), Point2(*jxy[b]), Point2(ln[0], ln[1]), Point2(ln[2], ln[3]), float(dl)))
    return out


def proposals_to_array(props) -> np.ndarray:
    """``(N, 10)`` rows ``[y1x, y1y, y2x, y2y, x1x, x1y, x2x, x2y, delta, score]``."""
    if isinstance(props, np.ndarray):
        return props.reshape(-1, 10)
    if not props:
        return np.zeros((0, 10))
    return np.array([p.as_row() for p in props], dtype=np.float64)


def assign_verification_labels(props, gt: Wireframe, tau_ver: float = TAU_VER, units: float = DEFAULT_UNITS) -> list[bool]:
    """True for proposals whose junction endpoints both lie within ``tau_ver`` of some gt segment's ends.

    Uses the endpoint pairing that minimises the larger of the two distances;
    the comparison is strict.
    """
    arr = proposals_to_array(props)
    if len(arr) == 0:
        return []
    g = gt.segment_array() / units
    if len(g) == 0:
        return [False] * len(arr)
    y = arr[:, 0:4] / units
    Y = y[:, None, :]
    G = g[None, :, :]
    same = np.maximum(np.hypot(Y[..., 0] - G[..., 0], Y[..., 1] - G[..., 1]),
                      np.hypot(Y[..., 2] - G[..., 2], Y[..., 3] - G[..., 3]))
    swap = np.maximum(np.hypot(Y[..., 0] - G[..., 2], Y[..., 1] - G[..., 3]),
                      np.hypot(Y[..., 2] - G[..., 0], Y[..., 3] - G[..., 1]))
    dist = np.minimum(same, swap).min(axis=1)
    return [bool(v) for v in dist < tau_ver]


def proposals_to_wireframe(props, width: int, height: int) -> Wireframe:
    """Wireframe made of the junction-anchored ``(y1, y2)`` segments, scored by ``score``."""
    arr = proposals_to_array(props)
    segs = arr[:, 0:4]
    keep = (segs[:, 0] != segs[:, 2]) | (segs[:, 1] != segs[:, 3])
    juncs = np.unique(np.concatenate([segs[keep, 0:2], segs[keep, 2:4]]), axis=0) if keep.any() else np.zeros((0, 2))
    return Wireframe.from_arrays(width, height, segs[keep], arr[keep, 9], juncs)
