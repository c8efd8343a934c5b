"""Training-loss evaluators (forward values only, no gradients).

Field l1 terms are means over the ground-truth foreground; the endpoint
error, offset and junction terms follow the summed/averaged forms noted on
each function.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from hawp.errors import AllOneClassWarning, ClampWarning, DomainError, LengthMismatch, ShapeMismatch
from hawp.geometry import Wireframe
from hawp.hatfield import (
    DEFAULT_D_MIN,
    DEFAULT_SCALES,
    HatField,
    _lattice_points,
    assign_regions,
    decode_points,
    denormalize,
)
from hawp.junctions import JunctionMaps

EPS = 1e-7
BETA_PT = 8.0
BETA_O = 0.25


class FieldL1(NamedTuple):
    l1_d: float
    l1_angles: float
    l1_residual: float


@dataclass(frozen=True)
class LossReport:
    l1_d: float = 0.0
    l1_angles: float = 0.0
    l1_residual: float = 0.0
    epe: float = 0.0
    bce_junction: float = 0.0
    l1_offset: float = 0.0
    bce_edge_balanced: float = 0.0
    beta_pt: float = BETA_PT
    beta_o: float = BETA_O

    @property
    def total(self) -> float:
        return (
            self.l1_d + self.l1_angles + self.l1_residual + self.epe
            + self.beta_pt * self.bce_junction + self.beta_o * self.l1_offset
            + self.bce_edge_balanced
        )


def _same_shape(a: HatField, b: HatField):
    if a.shape != b.shape:
        raise ShapeMismatch(f"fields differ in shape: {a.shape} vs {b.shape}")


def residual_target(pred: HatField, gt: HatField) -> np.ndarray:
    """On-the-fly residual target ``|gt.d - pred.d|``."""
    _same_shape(pred, gt)
    return np.abs(gt.d.astype(np.float64) - pred.d.astype(np.float64))


def field_l1_losses(pred: HatField, gt: HatField) -> FieldL1:
    """Masked mean absolute errors for the distance, angle and residual planes."""
    _same_shape(pred, gt)
    m = gt.foreground()
    count = int(m.sum())
    if count == 0:
        return FieldL1(0.0, 0.0, 0.0)

    def err(a, b):
        return np.abs(a[m].astype(np.float64) - b[m].astype(np.float64))

    l1_d = err(pred.d, gt.d).mean()
    l1_ang = np.concatenate([err(pred.theta, gt.theta), err(pred.theta1, gt.theta1),
                             err(pred.theta2, gt.theta2)]).mean()
    l1_res = np.abs(pred.delta_d[m].astype(np.float64) - residual_target(pred, gt)[m]).mean()
    return FieldL1(float(l1_d), float(l1_ang), float(l1_res))


def _pairing_l1(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    same = np.abs(a - b).sum(axis=1)
    swap = np.abs(a - b[:, [2, 3, 0, 1]]).sum(axis=1)
    return np.minimum(same, swap)


def epe_loss(pred: HatField, gt_wf: Wireframe, scales: Sequence[int] = DEFAULT_SCALES,
             stride: int | None = None, d_min: float = DEFAULT_D_MIN) -> float:
    """Length-normalised endpoint error summed over scales and foreground pixels.

    The foreground and the attracting segment of each pixel come from the
    ground-truth wireframe; lengths and errors are in lattice units. The
    rectified normalised distance is clipped to ``[0, 1]``.
    """
    stride = pred.stride if stride is None else stride
    regions = assign_regions(gt_wf, pred.width_s, pred.height_s, pred.tau_d, d_min, stride)
    labels = regions.labels.ravel()
    fg = labels >= 0
    if not fg.any():
        return 0.0
    pts = _lattice_points(pred.width_s, pred.height_s)[fg]
    gt_lines = gt_wf.segment_array()[labels[fg]] / stride
    lengths = np.hypot(gt_lines[:, 2] - gt_lines[:, 0], gt_lines[:, 3] - gt_lines[:, 1])
    base = np.stack([pred.d.ravel()[fg], pred.theta.ravel()[fg], pred.theta1.ravel()[fg],
                     pred.theta2.ravel()[fg]], axis=1).astype(np.float64)
    delta = pred.delta_d.ravel()[fg].astype(np.float64)
    total = 0.0
    for i in scales:
        vals = base.copy()
        vals[:, 0] = np.clip(base[:, 0] + i * delta, 0.0, 1.0)
        lines = decode_points(pts, denormalize(vals, pred.tau_d))
        total += float((_pairing_l1(lines, gt_lines) / lengths).sum())
    return total


def _check_probs(p: np.ndarray, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    if np.any(p < EPS) or np.any(p > 1.0 - EPS):
        warnings.warn(f"{name} clamped to [{EPS}, {1 - EPS}]", ClampWarning, stacklevel=3)
    return np.clip(p, EPS, 1.0 - EPS)


def _bce(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def junction_losses(pred: JunctionMaps, gt: JunctionMaps, beta_pt: float = BETA_PT,
                    beta_o: float = BETA_O) -> tuple[float, float, float]:
    """``(bce, l1_offset, beta_pt * bce + beta_o * l1_offset)``.

    The cross-entropy is averaged over all cells; the offset error is summed
    over cells that hold a ground-truth endpoint.
    """
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"junction maps differ in shape: {pred.shape} vs {gt.shape}")
    p = _check_probs(pred.heatmap, "predicted heatmap")
    y = np.asarray(gt.heatmap, dtype=np.float64)
    bce = float(_bce(p, y).mean())
    off = np.abs(pred.offset_x.astype(np.float64) - gt.offset_x) + np.abs(pred.offset_y.astype(np.float64) - gt.offset_y)
    l1 = float((off * y).sum())
    return bce, l1, beta_pt * bce + beta_o * l1


def balanced_bce_edge(pred, gt) -> float:
    """Class-balanced cross-entropy: the mean of the positive-class and negative-class averages.

    Falls back to the plain mean (with an :class:`AllOneClassWarning`) when
    ``gt`` has a single class.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"edge maps differ in shape: {pred.shape} vs {gt.shape}")
    p = _check_probs(pred, "edge prediction")
    pos = gt > 0.5
    n_pos = int(pos.sum())
    n_neg = gt.size - n_pos
    loss = _bce(p, gt)
    if n_pos == 0 or n_neg == 0:
        warnings.warn("ground truth has a single class; using unbalanced BCE", AllOneClassWarning, stacklevel=2)
        return float(loss.mean())
    return float(0.5 * (loss[pos].sum() / n_pos + loss[~pos].sum() / n_neg))


def verification_bce(scores, labels) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape:
        raise LengthMismatch(f"{scores.size} scores for {labels.size} labels")
    if scores.size == 0:
        return 0.0
    return float(_bce(_check_probs(scores, "verification scores"), labels).mean())
