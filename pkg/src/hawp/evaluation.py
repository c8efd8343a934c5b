"""Quantitative evaluation: structural AP, junction mAP, heatmap AP/F and repeatability.

All precision/recall curves are accumulated over the whole dataset and
integrated with all-point interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.spatial import cKDTree
from skimage.draw import line as draw_line

from hawp.errors import DegenerateHomography, LengthMismatch, SamplingFailed
from hawp.geometry import (
    Homography,
    Wireframe,
    orthogonal_distance_matrix,
    structural_distance_matrix,
    warp_wireframe,
)

SAP_THRESHOLDS = (5.0, 10.0, 15.0)
JUNCTION_THRESHOLDS = (0.5, 1.0, 2.0)
DOMAIN = (128, 128)
HEATMAP_TOL = 0.0075 * math.hypot(128, 128)
REPEAT_EPS = 5.0


@dataclass
class PrCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    ap: float

    @property
    def f_max(self) -> float:
        p, r = self.precision, self.recall
        denom = p + r
        f = np.divide(2 * p * r, denom, out=np.zeros_like(denom), where=denom > 0)
        return float(f.max()) if len(f) else 0.0


@dataclass
class RepeatabilityResult:
    """``rep`` averages the two directional ratios; ``loc`` is NaN when nothing matched."""

    rep: float
    loc: float
    matched: int
    total: int
    forward: tuple[int, int] = (0, 0)
    backward: tuple[int, int] = (0, 0)


def average_precision(recall, precision) -> float:
    """Area under the monotone precision envelope (all-point interpolation)."""
    r = np.concatenate([[0.0], np.asarray(recall, dtype=np.float64)])
    p = np.concatenate([[0.0], np.asarray(precision, dtype=np.float64)])
    if len(r) == 1:
        return 0.0
    env = np.maximum.accumulate(p[::-1])[::-1]
    return float(np.sum((r[1:] - r[:-1]) * env[1:]))


def _ap_from_counts(tp_counts, precision, n_gt: int) -> float:
    """Same area as :func:`average_precision`, summed over integer recall steps.

    Working in counts keeps a perfect curve at exactly 1.0.
    """
    tp_counts = np.asarray(tp_counts, dtype=np.float64)
    if n_gt <= 0 or len(tp_counts) == 0:
        return 0.0
    env = np.maximum.accumulate(np.asarray(precision, dtype=np.float64)[::-1])[::-1]
    steps = np.diff(tp_counts, prepend=0.0)
    return float(np.sum(steps * env) / n_gt)


def pr_curve(scores, tp, n_gt: int) -> PrCurve:
    """PR curve from per-detection scores and true-positive flags."""
    scores = np.asarray(scores, dtype=np.float64)
    tp = np.asarray(tp, dtype=bool)
    order = np.argsort(-scores, kind="stable")
    tps = np.cumsum(tp[order])
    fps = np.cumsum(~tp[order])
    precision = tps / np.maximum(tps + fps, 1)
    recall = tps / n_gt if n_gt > 0 else np.zeros(len(tps))
    ap = _ap_from_counts(tps, precision, n_gt)
    return PrCurve(scores[order], precision, recall, ap)


def greedy_match(dist: np.ndarray, scores, threshold: float) -> np.ndarray:
    """Score-ordered greedy assignment.

    Each prediction, from highest score down (stable for ties), takes the
    nearest still-unmatched target with ``dist <= threshold``. Returns the
    matched target index per prediction (``-1`` when unmatched).
    """
    dist = np.asarray(dist, dtype=np.float64)
    n_pred, n_gt = dist.shape
    match = np.full(n_pred, -1, dtype=np.int64)
    if n_pred == 0 or n_gt == 0:
        return match
    taken = np.zeros(n_gt, dtype=bool)
    for i in np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable"):
        row = np.where(taken | (dist[i] > threshold), np.inf, dist[i])
        j = int(np.argmin(row))
        if np.isfinite(row[j]):
            match[i] = j
            taken[j] = True
    return match


def _check_lengths(preds, gts):
    if len(preds) != len(gts):
        raise LengthMismatch(f"{len(preds)} predictions for {len(gts)} ground truths")


def _to_domain(wf: Wireframe, domain) -> tuple[np.ndarray, np.ndarray]:
    sx = domain[0] / wf.width
    sy = domain[1] / wf.height
    return wf.segment_array() * np.array([sx, sy, sx, sy]), wf.junction_array() * np.array([sx, sy])


def _sq_endpoint_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    A = a[:, None, :]
    B = b[None, :, :]
    same = ((A - B) ** 2).sum(-1)
    swap = ((A - B[..., [2, 3, 0, 1]]) ** 2).sum(-1)
    return np.minimum(same, swap)


def sap_curves(preds: Sequence[Wireframe], gts: Sequence[Wireframe],
               thresholds: Sequence[float] = SAP_THRESHOLDS, domain=DOMAIN) -> dict[float, PrCurve]:
    _check_lengths(preds, gts)
    scores, hits, n_gt = [], {t: [] for t in thresholds}, 0
    for pred, gt in zip(preds, gts):
        p, _ = _to_domain(pred, domain)
        g, _ = _to_domain(gt, domain)
        s = pred.segment_scores()
        n_gt += len(g)
        scores.append(s)
        dist = _sq_endpoint_dist(p, g) if len(p) and len(g) else np.zeros((len(p), len(g)))
        for t in thresholds:
            hits[t].append(greedy_match(dist, s, t) >= 0)
    all_scores = np.concatenate(scores) if scores else np.zeros(0)
    return {t: pr_curve(all_scores, np.concatenate(hits[t]) if hits[t] else np.zeros(0, bool), n_gt)
            for t in thresholds}


def sap(preds: Sequence[Wireframe], gts: Sequence[Wireframe],
        thresholds: Sequence[float] = SAP_THRESHOLDS, domain=DOMAIN) -> dict[float, float]:
    """Structural AP at each squared-endpoint-distance threshold.

    Segment scores rank the predictions; both sides are rescaled to
    ``domain`` before matching.
    """
    return {t: c.ap for t, c in sap_curves(preds, gts, thresholds, domain).items()}


def junction_ap(preds: Sequence[Wireframe], gts: Sequence[Wireframe],
                thresholds: Sequence[float] = JUNCTION_THRESHOLDS, domain=DOMAIN) -> dict[float, float]:
    _check_lengths(preds, gts)
    scores, hits, n_gt = [], {t: [] for t in thresholds}, 0
    for pred, gt in zip(preds, gts):
        _, p = _to_domain(pred, domain)
        _, g = _to_domain(gt, domain)
        s = pred.junction_scores()
        n_gt += len(g)
        scores.append(s)
        dist = ((p[:, None, :] - g[None, :, :]) ** 2).sum(-1) if len(p) and len(g) else np.zeros((len(p), len(g)))
        for t in thresholds:
            hits[t].append(greedy_match(dist, s, t) >= 0)
    all_scores = np.concatenate(scores) if scores else np.zeros(0)
    return {t: pr_curve(all_scores, np.concatenate(hits[t]) if hits[t] else np.zeros(0, bool), n_gt).ap
            for t in thresholds}


def map_junctions(preds: Sequence[Wireframe], gts: Sequence[Wireframe],
                  thresholds: Sequence[float] = JUNCTION_THRESHOLDS, domain=DOMAIN) -> float:
    """Mean junction AP over squared-distance thresholds (junction scores rank predictions)."""
    aps = junction_ap(preds, gts, thresholds, domain)
    return float(np.mean(list(aps.values())))


# --- heatmap metrics ---------------------------------------------------------

def rasterize(segments: np.ndarray, scores, domain=DOMAIN) -> np.ndarray:
    """Bresenham rasterisation; each pixel keeps the highest covering score (0 = empty)."""
    w, h = domain
    out = np.zeros((h, w))
    for seg, s in zip(np.asarray(segments).reshape(-1, 4), scores):
        c0, r0, c1, r1 = (int(round(v)) for v in seg)
        c0, c1 = min(max(c0, 0), w - 1), min(max(c1, 0), w - 1)
        r0, r1 = min(max(r0, 0), h - 1), min(max(r1, 0), h - 1)
        rr, cc = draw_line(r0, c0, r1, c1)
        np.maximum.at(out, (rr, cc), s)
    return out


def match_pixels(pred_px: np.ndarray, gt_px: np.ndarray, tol: float) -> int:
    """Greedy one-to-one nearest matching of pixel sets within ``tol``; returns the match count."""
    if len(pred_px) == 0 or len(gt_px) == 0:
        return 0
    tp = cKDTree(pred_px).sparse_distance_matrix(cKDTree(gt_px), tol, output_type="ndarray")
    if len(tp) == 0:
        return 0
    order = np.lexsort((tp["j"], tp["i"], tp["v"]))
    used_p = np.zeros(len(pred_px), dtype=bool)
    used_g = np.zeros(len(gt_px), dtype=bool)
    count = 0
    for k in order:
        i, j = tp["i"][k], tp["j"][k]
        if not used_p[i] and not used_g[j]:
            used_p[i] = used_g[j] = True
            count += 1
    return count


def heatmap_ap_f(preds: Sequence[Wireframe], gts: Sequence[Wireframe], domain=DOMAIN,
                 tol: float = HEATMAP_TOL, cutoffs=None, max_cutoffs: int = 100) -> tuple[float, float]:
    """Pixel-level AP and best F over a sweep of score cutoffs.

    Counts are pooled over the dataset before computing precision and
    recall. Without explicit ``cutoffs`` the distinct prediction scores are
    used (thinned to ``max_cutoffs`` quantiles when there are more).
    """
    _check_lengths(preds, gts)
    maps, gt_maps = [], []
    for pred, gt in zip(preds, gts):
        p, _ = _to_domain(pred, domain)
        g, _ = _to_domain(gt, domain)
        maps.append(rasterize(p, pred.segment_scores(), domain))
        gt_maps.append(rasterize(g, np.ones(len(g)), domain) > 0)
    if cutoffs is None:
        all_s = np.unique(np.concatenate([m[m > 0] for m in maps])) if maps else np.zeros(0)
        if len(all_s) > max_cutoffs:
            all_s = np.unique(np.quantile(all_s, np.linspace(0, 1, max_cutoffs)))
        cutoffs = all_s
    cutoffs = np.sort(np.asarray(cutoffs, dtype=np.float64))[::-1]
    cutoffs = cutoffs[cutoffs > 0]
    n_gt = sum(int(g.sum()) for g in gt_maps)
    precision, recall, tps = [], [], []
    for c in cutoffs:
        tp = fp = 0
        for m, g in zip(maps, gt_maps):
            pred_px = np.argwhere(m >= c)
            k = match_pixels(pred_px, np.argwhere(g), tol)
            tp += k
            fp += len(pred_px) - k
        tps.append(tp)
        precision.append(tp / max(tp + fp, 1))
        recall.append(tp / n_gt if n_gt else 0.0)
    if not len(cutoffs) or n_gt == 0:
        return 0.0, 0.0
    curve = PrCurve(cutoffs, np.array(precision), np.array(recall), 0.0)
    curve.ap = _ap_from_counts(tps, curve.precision, n_gt)
    return curve.ap, curve.f_max


# --- repeatability -----------------------------------------------------------

def _directional(src: Wireframe, dst: Wireframe, h: Homography, metric: str, eps: float):
    warped = warp_wireframe(h, src, (dst.width, dst.height))
    a = warped.segment_array()
    b = dst.segment_array()
    if len(a) == 0:
        return 0, 0, []
    if len(b) == 0:
        return 0, len(a), []
    if metric == "structural":
        dist = structural_distance_matrix(a, b)
    elif metric == "orthogonal":
        dist = orthogonal_distance_matrix(a, b)
    else:
        raise ValueError(f"metric must be 'structural' or 'orthogonal', got {metric!r}")
    best = dist.min(axis=1)
    hit = best <= eps
    return int(hit.sum()), len(a), list(best[hit])


def repeatability(wf_a: Wireframe, wf_b: Wireframe, h: Homography, metric: str = "structural",
                  eps: float = REPEAT_EPS) -> RepeatabilityResult:
    """Fraction of segments re-detected across ``h`` (which maps image a to image b).

    Segments are warped into the other view (and clipped to it); a segment
    repeats when its nearest counterpart is within ``eps``. The score is the
    mean of the a->b and b->a ratios; ``loc`` averages the matched distances.
    """
    if abs(np.linalg.det(h.m)) < 1e-12:
        raise DegenerateHomography("repeatability needs an invertible homography")
    m_ab, n_ab, d_ab = _directional(wf_a, wf_b, h, metric, eps)
    m_ba, n_ba, d_ba = _directional(wf_b, wf_a, h.inverse(), metric, eps)
    ratios = [m / n for m, n in ((m_ab, n_ab), (m_ba, n_ba)) if n > 0]
    rep = float(np.mean(ratios)) if ratios and (n_ab > 0 and n_ba > 0) else 0.0
    dists = d_ab + d_ba
    loc = float(np.mean(dists)) if dists else float("nan")
    return RepeatabilityResult(rep, loc, m_ab + m_ba, n_ab + n_ba, (m_ab, n_ab), (m_ba, n_ba))


# --- random homographies -----------------------------------------------------

class HomographyParams(NamedTuple):
    perspective: float
    shift_left: float
    shift_right: float
    scale: float
    translation: tuple[float, float]
    angle: float
    patch: np.ndarray


def _truncated_normal(rng: np.random.Generator, mean: float, std: float, bound: float = 2.0) -> float:
    while True:
        z = rng.standard_normal()
        if abs(z) <= bound:
            return mean + std * z


def sample_homography_params(rng: np.random.Generator, patch_ratio: float = 0.85,
                             perspective_amplitude: float = 0.2, scaling_std: float = 0.1,
                             max_angle: float = math.pi / 2) -> HomographyParams:
    """Draw a warped patch in unit-square coordinates.

    Starts from a centred square patch of side ``patch_ratio``; applies
    truncated-Gaussian perspective shifts (std = amplitude / 2), a
    truncated-Gaussian scale around 1, a uniform translation keeping the
    patch inside the unit square when possible and a uniform rotation.
    """
    margin = (1.0 - patch_ratio) / 2.0
    pts = margin + patch_ratio * np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    std = perspective_amplitude / 2.0
    persp = _truncated_normal(rng, 0.0, std)
    left = _truncated_normal(rng, 0.0, std)
    right = _truncated_normal(rng, 0.0, std)
    pts = pts + np.array([[left, persp], [left, -persp], [right, persp], [right, -persp]])
    scale = _truncated_normal(rng, 1.0, scaling_std)
    center = pts.mean(axis=0)
    pts = (pts - center) * scale + center
    lo = -np.maximum(pts.min(axis=0), 0.0)
    hi = np.maximum((1.0 - pts).min(axis=0), 0.0)
    t = (rng.uniform(lo[0], hi[0]), rng.uniform(lo[1], hi[1]))
    pts = pts + np.array(t)
    angle = rng.uniform(-max_angle, max_angle)
    c, s = math.cos(angle), math.sin(angle)
    center = pts.mean(axis=0)
    pts = (pts - center) @ np.array([[c, s], [-s, c]]) + center
    return HomographyParams(persp, left, right, scale, t, angle, pts)


def homography_from_points(src, dst) -> np.ndarray:
    """Exact 4-point homography mapping ``src[i]`` to ``dst[i]``."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for k, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * k] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * k + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * k] = u
        b[2 * k + 1] = v
    h = np.linalg.solve(a, b)
    return np.append(h, 1.0).reshape(3, 3)


def sample_homography(rng_seed: int, size: tuple[int, int], max_attempts: int = 100,
                      **kwargs) -> Homography:
    """Random homography mapping an image of ``size = (width, height)`` to its warped view.

    The sampled patch of the source image is stretched onto the full output
    frame. Deterministic for a given seed; near-singular draws are redrawn.
    """
    width, height = size
    if width <= 0 or height <= 0:
        raise ValueError("size must be positive")
    rng = np.random.default_rng(rng_seed)
    corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]) * [width, height]
    for _ in range(max_attempts):
        params = sample_homography_params(rng, **kwargs)
        try:
            m = homography_from_points(params.patch * [width, height], corners)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(m)) or np.linalg.cond(m) > 1e10:
            continue
        # the output frame must not contain the line at infinity of the inverse map
        inv = np.linalg.inv(m)
        w = inv[2, 0] * corners[:, 0] + inv[2, 1] * corners[:, 1] + inv[2, 2]
        if np.any(w <= 1e-9):
            continue
        return Homography(m)
    raise SamplingFailed(f"no well-conditioned homography in {max_attempts} attempts")
