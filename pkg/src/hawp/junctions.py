"""Endpoint heatmaps with sub-cell offsets, and peak extraction from them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hawp.errors import ShapeMismatch
from hawp.geometry import Point2, Wireframe
from hawp.hatfield import DEFAULT_STRIDE, lattice_shape

TAU_J = 0.008
MIN_TOP_N = 300


@dataclass
class JunctionMaps:
    heatmap: np.ndarray
    offset_x: np.ndarray
    offset_y: np.ndarray
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        self.heatmap = np.asarray(self.heatmap)
        self.offset_x = np.asarray(self.offset_x)
        self.offset_y = np.asarray(self.offset_y)
        if not (self.heatmap.shape == self.offset_x.shape == self.offset_y.shape):
            raise ShapeMismatch("heatmap and offset planes must share a shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.heatmap.shape


def gt_junction_maps(wf: Wireframe, stride: int = DEFAULT_STRIDE, dtype=np.float32) -> JunctionMaps:
    """Binary endpoint heatmap and offsets for every unique endpoint of ``wf``.

    Endpoints on the far image border fall in the last cell (offset may then
    reach 1). When two endpoints share a cell the first one wins.
    """
    width_s, height_s = lattice_shape(wf.width, wf.height, stride)
    heat = np.zeros((height_s, width_s), dtype=dtype)
    ox = np.zeros_like(heat)
    oy = np.zeros_like(heat)
    for x, y in wf.unique_endpoints():
        u, v = x / stride, y / stride
        col = min(max(int(np.floor(u)), 0), width_s - 1)
        row = min(max(int(np.floor(v)), 0), height_s - 1)
        if heat[row, col] > 0:
            continue
        heat[row, col] = 1
        ox[row, col] = u - col
        oy[row, col] = v - row
    return JunctionMaps(heat, ox, oy, stride)


def local_maxima(heatmap: np.ndarray) -> np.ndarray:
    """3x3 non-maximum suppression with a row-major tie-break.

    A cell survives when it is strictly larger than every neighbour, or equal
    to a neighbour that comes later in row-major order.
    """
    h = np.asarray(heatmap, dtype=np.float64)
    rows, cols = h.shape
    padded = np.full((rows + 2, cols + 2), -np.inf)
    padded[1:-1, 1:-1] = h
    keep = np.ones_like(h, dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            nb = padded[1 + dr:1 + dr + rows, 1 + dc:1 + dc + cols]
            # neighbours before us in row-major order must be strictly smaller
            earlier = dr < 0 or (dr == 0 and dc < 0)
            keep &= (h > nb) if earlier else (h >= nb)
    return keep


def top_n(mode: str, heatmap: np.ndarray, n_gt: int = 0, tau_j: float = TAU_J) -> int:
    if mode == "train":
        return max(2 * n_gt, MIN_TOP_N)
    if mode == "test":
        return max(int(np.count_nonzero(np.asarray(heatmap) >= tau_j)), MIN_TOP_N)
    raise ValueError(f"mode must be 'train' or 'test', got {mode!r}")


def extract_junctions_array(
    maps: JunctionMaps, mode: str = "test", n_gt: int = 0, tau_j: float = TAU_J
) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`extract_junctions`: ``(xy[K, 2], scores[K])``."""
    heat = np.asarray(maps.heatmap, dtype=np.float64)
    keep = local_maxima(heat).ravel()
    idx = np.flatnonzero(keep)
    scores = heat.ravel()[idx]
    order = np.argsort(-scores, kind="stable")
    idx = idx[order][: top_n(mode, heat, n_gt, tau_j)]
    rows, cols = np.divmod(idx, heat.shape[1])
    x = (cols + maps.offset_x.ravel()[idx].astype(np.float64)) * maps.stride
    y = (rows + maps.offset_y.ravel()[idx].astype(np.float64)) * maps.stride
    return np.stack([x, y], axis=1), heat.ravel()[idx]


def extract_junctions(
    maps: JunctionMaps, mode: str = "test", n_gt: int = 0, tau_j: float = TAU_J
) -> list[tuple[Point2, float]]:
    """Peaks of the heatmap in image coordinates, sorted by descending score.

    ``mode="train"`` keeps ``max(2 * n_gt, 300)`` peaks; ``mode="test"``
    keeps ``max(#cells >= tau_j, 300)``.
    """
    xy, scores = extract_junctions_array(maps, mode, n_gt, tau_j)
    return [(Point2(float(x), float(y)), float(s)) for (x, y), s in zip(xy, scores)]
