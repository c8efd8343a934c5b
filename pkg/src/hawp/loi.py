"""Line-of-interest feature gathering and the verification scorer.

Endpoints are sampled on a wide feature grid, intermediate points on two
thin grids (one for the junction-anchored line, one for the decoded line).
The scorer is a plain dense network evaluated from externally supplied
weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from hawp.binding import Proposal
from hawp.errors import DimensionMismatch
from hawp.geometry import Point2

N_SAMPLES = 31
CHANNELS = 256
THIN_CHANNELS = 4
HIDDEN = 128


@dataclass
class FeatureGrid:
    """Channel-major ``(C, H, W)`` feature tensor."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim == 2:
            self.data = self.data[None]
        if self.data.ndim != 3:
            raise DimensionMismatch(f"feature grid must be (C, H, W), got {self.data.shape}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass
class Layer:
    w: np.ndarray
    b: np.ndarray
    act: str = "none"

    def __post_init__(self):
        self.w = np.atleast_2d(np.asarray(self.w, dtype=np.float64))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        if self.b.shape != (self.w.shape[0],):
            raise DimensionMismatch(f"bias of length {len(self.b)} for a {self.w.shape} matrix")
        if self.act not in ("relu", "none"):
            raise ValueError(f"unknown activation {self.act!r}")


@dataclass
class MlpWeights:
    layers: list[Layer]

    def __post_init__(self):
        self.layers = [l if isinstance(l, Layer) else Layer(*l) for l in self.layers]
        for a, b in zip(self.layers, self.layers[1:]):
            if a.w.shape[0] != b.w.shape[1]:
                raise DimensionMismatch(f"layer output {a.w.shape[0]} feeds input {b.w.shape[1]}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].w.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return mlp_forward(self, x)

    @classmethod
    def random(cls, dims: Sequence[int], rng: np.random.Generator, final_act: str = "none") -> "MlpWeights":
        """He-initialised network with rectifiers between layers; handy for demos and tests."""
        layers = []
        for k, (i, o) in enumerate(zip(dims[:-1], dims[1:])):
            act = final_act if k == len(dims) - 2 else "relu"
            layers.append(Layer(rng.normal(0, np.sqrt(2.0 / i), (o, i)), rng.normal(0, 0.01, o), act))
        return cls(layers)

    def to_dict(self) -> dict:
        return {"layers": [{"w": l.w.tolist(), "b": l.b.tolist(), "act": l.act} for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpWeights":
        return cls([Layer(l["w"], l["b"], l.get("act", "none")) for l in d["layers"]])


def mlp_forward(weights: MlpWeights, x) -> np.ndarray:
    """Apply the layers to ``x`` of shape ``(in,)`` or ``(N, in)``."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape[-1] != weights.in_dim:
        raise DimensionMismatch(f"input of size {h.shape[-1]} for a network expecting {weights.in_dim}")
    for layer in weights.layers:
        h = h @ layer.w.T + layer.b
        if layer.act == "relu":
            h = np.maximum(h, 0.0)
    return h


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def linear_samples(a, b, n: int) -> np.ndarray:
    """Interior points ``(1 - t) a + t b`` at ``t = i / n`` for ``i = 1 .. n-1``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    t = (np.arange(1, n) / n)[:, None]
    return (1.0 - t) * a + t * b


def sample_line_points(prop: Proposal, n: int = N_SAMPLES) -> tuple[list[Point2], list[Point2], list[Point2]]:
    if n < 2:
        raise ValueError("need n >= 2 to have an intermediate point")
    mid_y = [Point2(*p) for p in linear_samples(prop.y1, prop.y2, n)]
    mid_x = [Point2(*p) for p in linear_samples(prop.x1, prop.x2, n)]
    return [prop.y1, prop.y2], mid_y, mid_x


def bilinear_sample(grid: FeatureGrid, pts, padding: str = "border") -> np.ndarray:
    """Bilinearly interpolate ``grid`` at ``(N, 2)`` points ``(x, y)``; returns ``(N, C)``.

    ``padding="border"`` clamps points into the grid, ``"zeros"`` treats
    everything outside as zero.
    """
    data = grid.data
    _, h, w = data.shape
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    if padding == "border":
        x = np.clip(x, 0.0, w - 1)
        y = np.clip(y, 0.0, h - 1)
    elif padding != "zeros":
        raise ValueError(f"unknown padding {padding!r}")
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    out = np.zeros((len(pts), data.shape[0]))
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi = x0 + dx
            yi = y0 + dy
            wgt = wx * wy
            valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h) & (wgt != 0.0)
            if valid.any():
                out[valid] += wgt[valid, None] * data[:, yi[valid], xi[valid]].T
    return out


def gather_proposal_features(
    prop: Proposal,
    n: int,
    f_j: FeatureGrid,
    f_y: FeatureGrid,
    f_x: FeatureGrid,
    channels: int | None = None,
    thin_channels: int | None = None,
    scale: float = 1.0,
    padding: str = "border",
) -> tuple[np.ndarray, np.ndarray]:
    """``(Z, Z_psi)`` for one proposal.

    ``Z_psi`` is the thin-grid samples along the junction line followed by
    those along the decoded line; ``Z`` prepends the two endpoint features.
    Coordinates are divided by ``scale`` to land in grid units.
    """
    if channels is not None and f_j.channels != channels:
        raise DimensionMismatch(f"endpoint grid has {f_j.channels} channels, expected {channels}")
    if f_y.channels != f_x.channels:
        raise DimensionMismatch("the two thin grids must have the same channel count")
    if thin_channels is not None and f_y.channels != thin_channels:
        raise DimensionMismatch(f"thin grids have {f_y.channels} channels, expected {thin_channels}")
    ends, mid_y, mid_x = sample_line_points(prop, n)
    z_y = bilinear_sample(f_j, np.array(ends) / scale, padding).ravel()
    z_py = bilinear_sample(f_y, np.array(mid_y) / scale, padding).ravel()
    z_px = bilinear_sample(f_x, np.array(mid_x) / scale, padding).ravel()
    z_psi = np.concatenate([z_py, z_px])
    return np.concatenate([z_y, z_psi]), z_psi


class Score(NamedTuple):
    score: float
    logit: float
    aux: float | None
    aux_logit: float | None


def score_logits(z, z_psi, w_main: MlpWeights, w_psi: MlpWeights, w_final: MlpWeights,
                 w_aux: MlpWeights | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Batched logits: ``final(mlp_psi(z_psi) + mlp_main(z))`` and ``aux(z_psi)``."""
    if w_final.out_dim != 1:
        raise DimensionMismatch("the score head must output a single value")
    hidden_main = mlp_forward(w_main, z)
    hidden_psi = mlp_forward(w_psi, z_psi)
    if hidden_main.shape != hidden_psi.shape:
        raise DimensionMismatch(f"branch widths differ: {hidden_main.shape[-1]} vs {hidden_psi.shape[-1]}")
    logit = mlp_forward(w_final, hidden_psi + hidden_main)[..., 0]
    aux = None
    if w_aux is not None:
        if w_aux.out_dim != 1:
            raise DimensionMismatch("the auxiliary head must output a single value")
        aux = mlp_forward(w_aux, z_psi)[..., 0]
    return logit, aux


def score_proposal(z, z_psi, w_main: MlpWeights, w_psi: MlpWeights, w_final: MlpWeights,
                   w_aux: MlpWeights | None = None) -> Score:
    logit, aux = score_logits(np.asarray(z), np.asarray(z_psi), w_main, w_psi, w_final, w_aux)
    logit = float(logit)
    if aux is None:
        return Score(float(sigmoid(logit)), logit, None, None)
    aux = float(aux)
    return Score(float(sigmoid(logit)), logit, float(sigmoid(aux)), aux)


def score_proposals(props, n: int, f_j: FeatureGrid, f_y: FeatureGrid, f_x: FeatureGrid,
                    w_main: MlpWeights, w_psi: MlpWeights, w_final: MlpWeights,
                    scale: float = 1.0) -> np.ndarray:
    """Verification probabilities for a list of proposals, in input order."""
    props = list(props)
    if not props:
        return np.zeros(0)
    feats = [gather_proposal_features(p, n, f_j, f_y, f_x, scale=scale) for p in props]
    z = np.stack([f[0] for f in feats])
    z_psi = np.stack([f[1] for f in feats])
    logit, _ = score_logits(z, z_psi, w_main, w_psi, w_final)
    return sigmoid(logit)


def verification_network(rng: np.random.Generator, channels: int = CHANNELS, thin_channels: int = THIN_CHANNELS,
                         n: int = N_SAMPLES, hidden: int = HIDDEN) -> tuple[MlpWeights, MlpWeights, MlpWeights, MlpWeights]:
    """Randomly initialised ``(main, psi, final, aux)`` heads with the default sizes.

    Both branches use two hidden rectifier layers of width ``hidden``.
    """
    psi_dim = 2 * (n - 1) * thin_channels
    z_dim = 2 * channels + psi_dim
    w_main = MlpWeights.random([z_dim, hidden, hidden], rng, final_act="relu")
    w_psi = MlpWeights.random([psi_dim, hidden, hidden], rng, final_act="relu")
    w_final = MlpWeights.random([hidden, 1], rng)
    w_aux = MlpWeights.random([psi_dim, 1], rng)
    return w_main, w_psi, w_final, w_aux

