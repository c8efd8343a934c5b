"""Synthetic primitive images with exact wireframe annotations.

Eight primitives are available. Shapes are drawn on a 2x supersampled
canvas and box-filtered down, which gives anti-aliased edges; a random
background level, Gaussian noise and a global brightness shift follow.
Every sample is a pure function of ``(primitive, seed, size, config)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter
from skimage.draw import polygon as draw_polygon

from hawp.errors import IoFailure
from hawp.evaluation import homography_from_points
from hawp.geometry import Wireframe

PRIMITIVES = ("checkerboard", "lines", "cube", "gaussian", "strips", "polygon", "polygons", "star")
DEFAULT_SIZE = (256, 256)
_SUPERSAMPLE = 2
_MAX_TRIES = 2000


@dataclass(frozen=True)
class SynthConfig:
    polygon_vertices: tuple[int, int] = (3, 8)
    polygons_count: tuple[int, int] = (2, 4)
    star_spokes: tuple[int, int] = (5, 8)
    strip_bands: tuple[int, int] = (2, 6)
    line_count: tuple[int, int] = (1, 10)
    checker_cells: tuple[int, int] = (2, 6)
    line_min_length: float = 32.0
    min_edge: float = 16.0
    margin: float = 8.0
    stroke_width: tuple[float, float] = (1.5, 3.0)
    noise_sigma: float = 10.0
    brightness: float = 20.0


@dataclass
class SynthSample:
    image: np.ndarray
    wireframe: Wireframe
    primitive: str
    seed: int


class _Canvas:
    def __init__(self, width: int, height: int, background: float):
        self.width, self.height = width, height
        k = _SUPERSAMPLE
        self.data = np.full((height * k, width * k), float(background))

    def fill(self, pts, value: float):
        pts = np.asarray(pts, dtype=np.float64)
        k = _SUPERSAMPLE
        # pixel centres sit at integer image coordinates
        rr, cc = draw_polygon(k * pts[:, 1] + (k - 1) / 2, k * pts[:, 0] + (k - 1) / 2, self.data.shape)
        self.data[rr, cc] = value

    def stroke(self, a, b, width: float, value: float):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        d = b - a
        n = np.array([-d[1], d[0]]) / np.hypot(*d) * (width / 2)
        self.fill([a + n, b + n, b - n, a - n], value)

    def render(self) -> np.ndarray:
        k = _SUPERSAMPLE
        return self.data.reshape(self.height, k, self.width, k).mean(axis=(1, 3))


def _contrasting(rng, avoid, lo=0.0, hi=255.0, gap=40.0) -> float:
    for _ in range(100):
        v = rng.uniform(lo, hi)
        if all(abs(v - a) >= gap for a in avoid):
            return v
    return hi if all(abs(hi - a) >= gap for a in avoid) else lo


def _edges_of(poly) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly))]


def _inside(pts, size, margin) -> bool:
    pts = np.asarray(pts)
    w, h = size
    return bool(np.all(pts[:, 0] >= margin) and np.all(pts[:, 0] <= w - margin)
                and np.all(pts[:, 1] >= margin) and np.all(pts[:, 1] <= h - margin))


def _min_angle(poly) -> float:
    k = len(poly)
    best = math.pi
    for i in range(k):
        a = poly[i - 1] - poly[i]
        b = poly[(i + 1) % k] - poly[i]
        cos = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
        best = min(best, math.acos(max(-1.0, min(1.0, cos))))
    return best


def _point_segment_distance(p, a, b) -> float:
    d = b - a
    t = min(max(np.dot(p - a, d) / np.dot(d, d), 0.0), 1.0)
    return float(np.linalg.norm(p - (a + t * d)))


def _random_polygon(rng, k, center, radius, cfg: SynthConfig):
    """Star-shaped simple polygon with long enough edges and no needle-thin corners."""
    for _ in range(_MAX_TRIES):
        angles = np.sort(rng.uniform(0, 2 * math.pi, k))
        gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * math.pi]]))
        if gaps.min() < 0.5 * math.pi / k:
            continue
        radii = rng.uniform(0.55, 1.0, k) * radius
        poly = center + np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
        lengths = [np.linalg.norm(b - a) for a, b in _edges_of(poly)]
        if min(lengths) < cfg.min_edge or _min_angle(poly) < math.radians(25):
            continue
        # vertices must keep clear of non-adjacent edges
        ok = all(_point_segment_distance(poly[i], a, b) >= 6.0
                 for i in range(k) for j, (a, b) in enumerate(_edges_of(poly))
                 if j != i and (j + 1) % k != i)
        if ok:
            return poly
    ang = np.arange(k) * 2 * math.pi / k
    return center + radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def _polygon(rng, size, cfg, canvas_bg):
    w, h = size
    k = int(rng.integers(cfg.polygon_vertices[0], cfg.polygon_vertices[1] + 1))
    r_max = min(w, h) / 2 - cfg.margin
    radius = rng.uniform(0.55, 1.0) * r_max
    center = np.array([rng.uniform(cfg.margin + radius, w - cfg.margin - radius),
                       rng.uniform(cfg.margin + radius, h - cfg.margin - radius)])
    poly = _random_polygon(rng, k, center, radius, cfg)
    value = _contrasting(rng, [canvas_bg])
    return [(poly, value)], []


def _polygons(rng, size, cfg, canvas_bg):
    w, h = size
    n = int(rng.integers(cfg.polygons_count[0], cfg.polygons_count[1] + 1))
    discs: list[tuple[np.ndarray, float]] = []
    for _ in range(_MAX_TRIES):
        if len(discs) == n:
            break
        r = rng.uniform(0.12, 0.3) * min(w, h)
        c = np.array([rng.uniform(cfg.margin + r, w - cfg.margin - r), rng.uniform(cfg.margin + r, h - cfg.margin - r)])
        if all(np.linalg.norm(c - c2) >= r + r2 + 8.0 for c2, r2 in discs):
            discs.append((c, r))
    shapes = []
    for c, r in discs:
        k = int(rng.integers(cfg.polygon_vertices[0], cfg.polygon_vertices[1] + 1))
        shapes.append((_random_polygon(rng, k, c, r, cfg), _contrasting(rng, [canvas_bg])))
    return shapes, []


def _star(rng, size, cfg, canvas_bg):
    w, h = size
    n = int(rng.integers(cfg.star_spokes[0], cfg.star_spokes[1] + 1))
    r_max = min(w, h) / 2 - cfg.margin
    center = np.array([w / 2, h / 2]) + rng.uniform(-0.15, 0.15, 2) * [w, h]
    limit = min(center[0] - cfg.margin, w - cfg.margin - center[0], center[1] - cfg.margin, h - cfg.margin - center[1])
    r_hi = min(r_max, limit)
    r_lo = min(cfg.line_min_length, r_hi)
    for _ in range(_MAX_TRIES):
        ang = np.sort(rng.uniform(0, 2 * math.pi, n))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
        if gaps.min() >= math.radians(25):
            break
    else:
        ang = np.arange(n) * 2 * math.pi / n
    lengths = rng.uniform(r_lo, r_hi, n)
    tips = center + np.stack([lengths * np.cos(ang), lengths * np.sin(ang)], axis=1)
    value = _contrasting(rng, [canvas_bg])
    width = rng.uniform(*cfg.stroke_width)
    return [], [(center, t, width, value) for t in tips]


def _lines(rng, size, cfg, canvas_bg):
    w, h = size
    n = int(rng.integers(cfg.line_count[0], cfg.line_count[1] + 1))
    segs: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(_MAX_TRIES):
        if len(segs) == n:
            break
        a = rng.uniform([cfg.margin, cfg.margin], [w - cfg.margin, h - cfg.margin])
        b = rng.uniform([cfg.margin, cfg.margin], [w - cfg.margin, h - cfg.margin])
        if np.linalg.norm(b - a) < cfg.line_min_length:
            continue
        clear = all(
            min(_point_segment_distance(a, c, d), _point_segment_distance(b, c, d),
                _point_segment_distance(c, a, b), _point_segment_distance(d, a, b)) >= 6.0
            for c, d in segs
        )
        if clear:
            segs.append((a, b))
    strokes = []
    for a, b in segs:
        strokes.append((a, b, rng.uniform(*cfg.stroke_width), _contrasting(rng, [canvas_bg])))
    return [], strokes


def _rotation(rng) -> np.ndarray:
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    a, b, c, d = q
    return np.array([
        [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
        [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
        [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
    ])


_CUBE_VERTS = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=np.float64)
# faces as vertex loops with outward normals
_CUBE_FACES = [
    ((0, 1, 3, 2), (-1, 0, 0)), ((4, 6, 7, 5), (1, 0, 0)),
    ((0, 4, 5, 1), (0, -1, 0)), ((2, 3, 7, 6), (0, 1, 0)),
    ((0, 2, 6, 4), (0, 0, -1)), ((1, 5, 7, 3), (0, 0, 1)),
]


def _cube(rng, size, cfg, canvas_bg):
    w, h = size
    for _ in range(_MAX_TRIES):
        rot = _rotation(rng)
        normals = np.array([n for _, n in _CUBE_FACES], dtype=np.float64) @ rot.T
        if np.abs(normals[:, 2]).min() < 0.2:
            continue
        half = rng.uniform(0.15, 0.25) * min(w, h)
        center = np.array([rng.uniform(0.35, 0.65) * w, rng.uniform(0.35, 0.65) * h])
        proj = center + half * (_CUBE_VERTS @ rot.T)[:, :2]
        if not _inside(proj, size, cfg.margin):
            continue
        visible = [f for (f, _), n in zip(_CUBE_FACES, normals) if n[2] < 0]
        edges = {tuple(sorted((f[i], f[(i + 1) % 4]))) for f in visible for i in range(4)}
        if min(np.linalg.norm(proj[a] - proj[b]) for a, b in edges) < cfg.min_edge:
            continue
        shapes, used = [], [canvas_bg]
        for f in visible:
            v = _contrasting(rng, used, gap=30.0)
            used.append(v)
            shapes.append((proj[list(f)], v))
        # edges shared by two visible faces are listed once
        return shapes, [], [(proj[a], proj[b]) for a, b in sorted(edges)]
    raise RuntimeError("cube sampling did not converge")


def _strips(rng, size, cfg, canvas_bg):
    w, h = size
    n = int(rng.integers(cfg.strip_bands[0], cfg.strip_bands[1] + 1))
    span = min(w, h) - 2 * cfg.margin
    for attempt in range(_MAX_TRIES):
        # small canvases: fall back to thin, axis-aligned, centred bands
        tight = attempt >= _MAX_TRIES // 2
        if tight:
            widths = np.full(n, cfg.min_edge)
            gaps = np.full(n - 1, cfg.min_edge / 2)
        else:
            widths = rng.uniform(cfg.min_edge, 2.5 * cfg.min_edge, n)
            gaps = rng.uniform(12.0, 2.0 * cfg.min_edge, n - 1)
        total = widths.sum() + gaps.sum()
        length = rng.uniform(0.5, 0.95) * span
        if total > 0.95 * span:
            n = max(cfg.strip_bands[0], n - 1)
            continue
        angle = rng.integers(2) * math.pi / 2 if tight else rng.uniform(0, math.pi)
        u = np.array([math.cos(angle), math.sin(angle)])
        v = np.array([-u[1], u[0]])
        center = np.array([w / 2, h / 2])
        if not tight:
            center = center + rng.uniform(-0.1, 0.1, 2) * [w, h]
        offs = np.concatenate([[0.0], np.cumsum(widths[:-1] + gaps)]) - total / 2
        quads = []
        for o, bw in zip(offs, widths):
            p0 = center + v * o - u * length / 2
            quads.append(np.array([p0, p0 + u * length, p0 + u * length + v * bw, p0 + v * bw]))
        if all(_inside(q, size, cfg.margin) for q in quads):
            value = _contrasting(rng, [canvas_bg])
            return [(q, value) for q in quads], []
    raise RuntimeError("strip sampling did not converge")


def _homography_unit_to_quad(quad: np.ndarray) -> np.ndarray:
    return homography_from_points([[0, 0], [1, 0], [1, 1], [0, 1]], quad)


def checkerboard_grid(rng, size, cfg) -> tuple[np.ndarray, int, int]:
    """Grid-point positions ``(rows + 1, cols + 1, 2)`` and the sampled ``rows, cols``."""
    w, h = size
    lo, hi = cfg.checker_cells
    rows = int(rng.integers(lo, hi + 1))
    cols = int(rng.integers(lo, hi + 1))
    for _ in range(_MAX_TRIES):
        bw = rng.uniform(0.6, 0.9) * (w - 2 * cfg.margin)
        bh = rng.uniform(0.6, 0.9) * (h - 2 * cfg.margin)
        x0 = rng.uniform(cfg.margin, w - cfg.margin - bw)
        y0 = rng.uniform(cfg.margin, h - cfg.margin - bh)
        jitter = rng.uniform(-0.06, 0.06, (4, 2)) * [w, h]
        quad = np.array([[x0, y0], [x0 + bw, y0], [x0 + bw, y0 + bh], [x0, y0 + bh]]) + jitter
        if not _inside(quad, size, cfg.margin):
            continue
        m = _homography_unit_to_quad(quad)
        gu, gv = np.meshgrid(np.arange(cols + 1) / cols, np.arange(rows + 1) / rows)
        q = np.stack([gu, gv, np.ones_like(gu)], axis=-1) @ m.T
        grid = q[..., :2] / q[..., 2:3]
        dx = np.linalg.norm(np.diff(grid, axis=1), axis=-1)
        dy = np.linalg.norm(np.diff(grid, axis=0), axis=-1)
        if min(dx.min(), dy.min()) >= cfg.min_edge:
            return grid, rows, cols
        if rows > lo or cols > lo:
            rows, cols = max(lo, rows - 1), max(lo, cols - 1)
    raise RuntimeError("checkerboard sampling did not converge")


def _checkerboard(rng, size, cfg, canvas_bg):
    grid, rows, cols = checkerboard_grid(rng, size, cfg)
    dark = rng.uniform(0, 70)
    light = rng.uniform(185, 255)
    shapes = []
    for r in range(rows):
        for c in range(cols):
            quad = np.array([grid[r, c], grid[r, c + 1], grid[r + 1, c + 1], grid[r + 1, c]])
            shapes.append((quad, dark if (r + c) % 2 == 0 else light))
    segs = []
    for r in range(rows + 1):
        for c in range(cols):
            segs.append((grid[r, c], grid[r, c + 1]))
    for c in range(cols + 1):
        for r in range(rows):
            segs.append((grid[r, c], grid[r + 1, c]))
    return shapes, [], segs


_BUILDERS = {
    "checkerboard": _checkerboard,
    "polygon": _polygon,
    "polygons": _polygons,
    "star": _star,
    "lines": _lines,
    "cube": _cube,
    "strips": _strips,
}


def sample_rng(primitive: str, seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), PRIMITIVES.index(primitive)]))


def _wireframe(segs, size) -> Wireframe:
    arr = np.array([[*a, *b] for a, b in segs], dtype=np.float64).reshape(-1, 4)
    return Wireframe.from_arrays(size[0], size[1], arr).with_endpoint_junctions()


def generate(primitive: str, seed: int, size: tuple[int, int] = DEFAULT_SIZE,
             config: SynthConfig | None = None) -> SynthSample:
    """Render one sample of ``primitive``; ``size`` is ``(width, height)``, at least 64 x 64."""
    if primitive not in PRIMITIVES:
        raise ValueError(f"unknown primitive {primitive!r}; choose from {', '.join(PRIMITIVES)}")
    w, h = size
    if w < 64 or h < 64:
        raise ValueError("size must be at least 64 x 64")
    cfg = config or SynthConfig()
    rng = sample_rng(primitive, seed)
    if primitive == "checkerboard":
        bg = rng.uniform(100, 150)
    else:
        bg = rng.uniform(30, 225)
    canvas = _Canvas(w, h, bg)
    segs: list = []
    if primitive == "gaussian":
        field = gaussian_filter(rng.standard_normal((h, w)), sigma=min(w, h) / 16)
        field = field / max(np.abs(field).max(), 1e-12)
        img = bg + 60.0 * field
    else:
        built = _BUILDERS[primitive](rng, size, cfg, bg)
        shapes, strokes = built[0], built[1]
        if len(built) > 2:
            segs = built[2]
        else:
            segs = [e for poly, _ in shapes for e in _edges_of(poly)]
            segs += [(a, b) for a, b, _, _ in strokes]
        for poly, value in shapes:
            canvas.fill(poly, value)
        for a, b, width, value in strokes:
            canvas.stroke(a, b, width, value)
        img = canvas.render()
    img = img + rng.normal(0.0, cfg.noise_sigma, img.shape) + rng.uniform(-cfg.brightness, cfg.brightness)
    image = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return SynthSample(image, _wireframe(segs, size), primitive, int(seed))


def sample_seed(master_seed: int, primitive: str, index: int) -> int:
    """Per-sample seed derived from ``(master_seed, primitive, index)``."""
    ss = np.random.SeedSequence([int(master_seed), PRIMITIVES.index(primitive), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def thread_count() -> int:
    env = os.environ.get("HAWP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def generate_dataset(out_dir, count_per_primitive: int = 2000, seed: int = 0,
                     primitives=PRIMITIVES, size: tuple[int, int] = DEFAULT_SIZE,
                     config: SynthConfig | None = None, threads: int | None = None) -> dict:
    """Write ``count_per_primitive`` samples of each primitive plus ``manifest.json``.

    Output is identical for any thread count since each sample depends only
    on its own derived seed.
    """
    from hawp.io import dump_json, save_pgm, save_wireframe

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc.strerror or exc}") from exc
    jobs = [(p, i) for p in primitives for i in range(count_per_primitive)]

    def work(job):
        prim, idx = job
        s = sample_seed(seed, prim, idx)
        sample = generate(prim, s, size, config)
        stem = f"{prim}_{idx:05d}"
        save_pgm(sample.image, out / f"{stem}.pgm")
        save_wireframe(sample.wireframe, out / f"{stem}.json")
        return {"image": f"{stem}.pgm", "wireframe": f"{stem}.json", "primitive": prim, "seed": s}

    n_threads = threads or thread_count()
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            entries = list(pool.map(work, jobs))
    else:
        entries = [work(j) for j in jobs]
    manifest = {
        "master_seed": int(seed),
        "size": list(size),
        "config": asdict(config or SynthConfig()),
        "samples": entries,
    }
    dump_json(manifest, out / "manifest.json")
    return manifest
