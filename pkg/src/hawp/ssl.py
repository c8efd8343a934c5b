"""Pseudo-labelling by homography adaptation.

Edge predictions made on randomly warped copies of an image are unwarped
and averaged; each putative segment is then rescored by the geometric mean
of its verification score and its edge support, and weak ones are pruned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import map_coordinates, maximum_filter
from skimage.draw import line as draw_line

from hawp.errors import DegenerateHomography, LengthMismatch
from hawp.geometry import Homography, Wireframe, segments_to_array

TAU_SSL = 0.75
N_EDGE_POINTS = 64
N_VIEWS = 10


@dataclass
class EdgeMap:
    """Per-pixel edge probability at full image resolution (clamped to ``[0, 1]``)."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        if g.ndim != 2:
            raise ValueError(f"edge map must be 2-D, got shape {g.shape}")
        self.grid = np.clip(np.nan_to_num(g, nan=0.0), 0.0, 1.0)

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def height(self) -> int:
        return self.grid.shape[0]


def unwarp_edges(edges: EdgeMap, h: Homography, out_size: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Resample a map predicted on the view warped by ``h`` back onto the original frame.

    Returns ``(values, covered)`` on the ``out_size = (width, height)`` grid.
    """
    if abs(np.linalg.det(h.m)) < 1e-12:
        raise DegenerateHomography("edge aggregation needs invertible homographies")
    w, hgt = out_size
    ys, xs = np.mgrid[0:hgt, 0:w]
    q = np.stack([xs.ravel(), ys.ravel(), np.ones(w * hgt)], axis=0).astype(np.float64)
    r = h.m @ q
    valid_w = r[2] > 1e-12
    den = np.where(valid_w, r[2], 1.0)
    u, v = r[0] / den, r[1] / den
    covered = valid_w & (u >= 0) & (u <= edges.width - 1) & (v >= 0) & (v <= edges.height - 1)
    vals = np.zeros(w * hgt)
    if covered.any():
        vals[covered] = map_coordinates(edges.grid, [v[covered], u[covered]], order=1, mode="nearest")
    return vals.reshape(hgt, w), covered.reshape(hgt, w)


def aggregate_edges(edge_maps: Sequence[EdgeMap], homographies: Sequence[Homography],
                    out_size: tuple[int, int]) -> EdgeMap:
    """Count-normalised mean of the unwarped views; pixels seen by no view are 0."""
    if len(edge_maps) != len(homographies):
        raise LengthMismatch(f"{len(edge_maps)} edge maps for {len(homographies)} homographies")
    if not edge_maps:
        raise LengthMismatch("need at least one view")
    w, h = out_size
    total = np.zeros((h, w))
    count = np.zeros((h, w))
    for e, hom in zip(edge_maps, homographies):
        vals, cov = unwarp_edges(e, hom, out_size)
        total += vals
        count += cov
    out = np.divide(total, count, out=np.zeros_like(total), where=count > 0)
    return EdgeMap(out)


def rasterize_edges(wf: Wireframe, size: tuple[int, int] | None = None) -> EdgeMap:
    """Binary edge map drawn from a wireframe (a stand-in for a learned edge predictor)."""
    w, h = size if size is not None else (wf.width, wf.height)
    grid = np.zeros((h, w))
    for x1, y1, x2, y2 in segments_to_array(wf.segments):
        c0, r0, c1, r1 = (int(round(v)) for v in (x1, y1, x2, y2))
        rr, cc = draw_line(min(max(r0, 0), h - 1), min(max(c0, 0), w - 1),
                           min(max(r1, 0), h - 1), min(max(c1, 0), w - 1))
        grid[rr, cc] = 1.0
    return EdgeMap(grid)


def _sample_indices(segs: np.ndarray, n_pts: int, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    t = np.arange(n_pts) / (n_pts - 1) if n_pts > 1 else np.zeros(1)
    x = segs[:, None, 0] + t * (segs[:, None, 2] - segs[:, None, 0])
    y = segs[:, None, 1] + t * (segs[:, None, 3] - segs[:, None, 1])
    col = np.clip(np.rint(x), 0, width - 1).astype(np.int64)
    row = np.clip(np.rint(y), 0, height - 1).astype(np.int64)
    return row, col


def edge_scores(segs, edges: EdgeMap, n_pts: int = N_EDGE_POINTS, window: int = 1) -> np.ndarray:
    """Vectorised :func:`edge_score` for many segments."""
    segs = segments_to_array(segs)
    if len(segs) == 0:
        return np.zeros(0)
    local_max = maximum_filter(edges.grid, size=2 * window + 1, mode="nearest")
    row, col = _sample_indices(segs, n_pts, edges.width, edges.height)
    return local_max[row, col].mean(axis=1)


def edge_score(seg, edges: EdgeMap, n_pts: int = N_EDGE_POINTS, window: int = 1) -> float:
    """Mean over ``n_pts`` evenly spaced samples of the local edge maximum.

    Samples are rounded to the nearest pixel and clamped into the map; the
    maximum is taken over a ``(2 * window + 1)`` square clipped to the map.
    """
    return float(edge_scores([seg], edges, n_pts, window)[0])


def ssl_scores(wf: Wireframe, edges: EdgeMap, n_pts: int = N_EDGE_POINTS, window: int = 1) -> np.ndarray:
    c = np.clip(wf.segment_scores(), 0.0, 1.0)
    return np.sqrt(c * edge_scores(wf.segments, edges, n_pts, window))


def ssl_filter(wf: Wireframe, edges: EdgeMap, tau_ssl: float = TAU_SSL, n_pts: int = N_EDGE_POINTS,
               window: int = 1) -> Wireframe:
    """Keep segments with ``sqrt(c * c_edge) >= tau_ssl``, rescored by that value.

    Junctions survive only if they coincide (within 1e-6) with an endpoint
    of a surviving segment.
    """
    c_ssl = ssl_scores(wf, edges, n_pts, window)
    keep = np.flatnonzero(c_ssl >= tau_ssl)
    segs = wf.segment_array()[keep]
    jxy = wf.junction_array()
    jscores = wf.junction_scores()
    if len(jxy) and len(segs):
        ends = np.concatenate([segs[:, 0:2], segs[:, 2:4]])
        d = np.abs(jxy[:, None, :] - ends[None, :, :]).max(axis=2).min(axis=1)
        jkeep = d <= 1e-6
    else:
        jkeep = np.zeros(len(jxy), dtype=bool)
    return Wireframe.from_arrays(wf.width, wf.height, segs, c_ssl[keep], jxy[jkeep], jscores[jkeep])


def pseudo_label(wf: Wireframe, edge_maps: Sequence[EdgeMap], homographies: Sequence[Homography],
                 tau_ssl: float = TAU_SSL, n_pts: int = N_EDGE_POINTS, window: int = 1) -> tuple[Wireframe, EdgeMap]:
    """Aggregate the views' edge maps onto ``wf``'s frame, then prune ``wf`` against them."""
    agg = aggregate_edges(edge_maps, homographies, (wf.width, wf.height))
    return ssl_filter(wf, agg, tau_ssl, n_pts, window), agg
