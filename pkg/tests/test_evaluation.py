import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hawp.errors import DegenerateHomography, LengthMismatch, SamplingFailed
from hawp.evaluation import (
    HEATMAP_TOL,
    average_precision,
    greedy_match,
    heatmap_ap_f,
    homography_from_points,
    map_junctions,
    pr_curve,
    rasterize,
    repeatability,
    sample_homography,
    sample_homography_params,
    sap,
    sap_curves,
)
from hawp.geometry import Homography, Wireframe, apply_homography, warp_wireframe
from tests.helpers import best_pairing_sq, random_segments

NO_SEGS = np.zeros((0, 4))


def WF(segs, scores=None, size=128):
    return Wireframe.from_arrays(size, size, segs, scores)


def JF(pts, scores=None, size=128):
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    return Wireframe.from_arrays(size, size, NO_SEGS, None, pts, scores if scores is not None else np.ones(len(pts)))


# --- AP plumbing ---

def test_average_precision_examples():
    assert average_precision([0.5, 1.0], [1.0, 0.5]) == pytest.approx(0.75)
    # envelope: the dip at recall 0.5 is lifted to the later precision
    assert average_precision([0.5, 0.5, 1.0], [1.0, 0.5, 0.8]) == pytest.approx(0.5 + 0.5 * 0.8)
    assert average_precision([], []) == 0.0


def test_pr_curve_counts_consistent(rng):
    scores = rng.uniform(size=40)
    tp = rng.uniform(size=40) > 0.4
    c = pr_curve(scores, tp, n_gt=30)
    order = np.argsort(-scores, kind="stable")
    for k in range(40):
        hits = tp[order[: k + 1]].sum()
        assert c.precision[k] == pytest.approx(hits / (k + 1))
        assert c.recall[k] == pytest.approx(hits / 30)
    assert np.all(np.diff(c.recall) >= 0)
    assert np.all(np.diff(c.thresholds) <= 0)
    assert 0 <= c.ap <= 1


# --- greedy matcher ---

def stable_oracle(dist, scores, thr):
    """Enumerate every partial injection and keep the one where no prediction
    prefers a target left free by all higher-scored predictions."""
    n_p, n_g = dist.shape
    order = sorted(range(n_p), key=lambda i: -scores[i])
    found = []
    for assign in itertools.product([-1, *range(n_g)], repeat=n_p):
        used = [a for a in assign if a >= 0]
        if len(used) != len(set(used)):
            continue
        ok = True
        taken = set()
        for i in order:
            free = [j for j in range(n_g) if j not in taken and dist[i, j] <= thr]
            want = min(free, key=lambda j: (dist[i, j], j)) if free else -1
            if assign[i] != want:
                ok = False
                break
            if want >= 0:
                taken.add(want)
        if ok:
            found.append(assign)
    assert len(found) == 1
    return list(found[0])


def test_greedy_matches_exhaustive_oracle(rng):
    for _ in range(300):
        n_p, n_g = rng.integers(0, 4, 2)
        dist = rng.integers(0, 8, (n_p, n_g)).astype(float)
        scores = rng.permutation(n_p).astype(float)
        got = greedy_match(dist, scores, 4.0)
        assert got.tolist() == stable_oracle(dist, scores, 4.0)


def test_greedy_higher_score_wins():
    dist = np.array([[1.0], [0.0]])
    assert greedy_match(dist, [0.9, 0.1], 5).tolist() == [0, -1]
    assert greedy_match(dist, [0.1, 0.9], 5).tolist() == [-1, 0]


# --- structural AP ---

def test_sap_perfect_and_empty(rng):
    gts = [WF(random_segments(rng, 5, 0, 128, 4)) for _ in range(3)]
    preds = [WF(g.segment_array(), rng.uniform(size=5)) for g in gts]
    assert sap(preds, gts) == {5.0: 1.0, 10.0: 1.0, 15.0: 1.0}
    assert set(sap([WF(NO_SEGS)] * 3, gts).values()) == {0.0}
    with pytest.raises(LengthMismatch):
        sap(preds[:2], gts)


def test_sap_squared_sum_seven():
    gt = [WF([[10, 10, 50, 10]])]
    pred = [WF([[52, 11, 11, 11]])]
    assert best_pairing_sq([52, 11, 11, 11], [10, 10, 50, 10]) == 7
    assert sap(pred, gt, thresholds=(5, 10, 15)) == {5: 0.0, 10: 1.0, 15: 1.0}


def test_sap_rescales_to_domain():
    # a 1 px error on a 512 image becomes 0.25 px in the 128 domain
    gt = [WF([[0, 0, 400, 0]], size=512)]
    pred = [WF([[0, 2, 400, 2]], size=512)]
    # squared sum 2 * 0.5^2 = 0.5
    assert sap(pred, gt, thresholds=(0.49, 0.5)) == {0.49: 0.0, 0.5: 1.0}


def test_sap_hand_curve():
    gt = [WF([[0, 0, 50, 0], [0, 20, 50, 20]])]
    pred = [WF([[0, 0, 50, 0], [100, 100, 120, 120], [0, 20, 50, 20]], [0.9, 0.8, 0.7])]
    c = sap_curves(pred, gt, thresholds=(5,))[5]
    assert c.precision.tolist() == pytest.approx([1, 0.5, 2 / 3])
    assert c.recall.tolist() == pytest.approx([0.5, 0.5, 1])
    assert c.ap == pytest.approx(0.5 + 0.5 * 2 / 3)


seg_list = st.lists(st.tuples(*[st.floats(0, 127)] * 4).filter(lambda s: math.hypot(s[2] - s[0], s[3] - s[1]) > 1),
                    min_size=0, max_size=6)


@given(seg_list, seg_list, st.lists(st.floats(0.01, 1), min_size=6, max_size=6))
def test_sap_monotone_in_threshold(p, g, s):
    pred = [WF(np.array(p).reshape(-1, 4), s[: len(p)])]
    gt = [WF(np.array(g).reshape(-1, 4))]
    aps = sap(pred, gt, thresholds=(1, 5, 10, 15, 50, 1e6))
    vals = list(aps.values())
    assert all(0 <= v <= 1 for v in vals)
    assert vals == sorted(vals)


# --- junction AP ---

def test_map_junctions_examples(rng):
    pts = rng.uniform(5, 120, (6, 2))
    gt = [JF(pts)]
    assert map_junctions([JF(pts, rng.uniform(size=6))], gt) == pytest.approx(1.0)
    shifted = pts + np.array([1.0, math.sqrt(0.5)])
    assert map_junctions([JF(shifted)], gt) == pytest.approx(1 / 3)
    assert map_junctions([JF(np.zeros((0, 2)))], gt) == 0.0


# --- heatmap metrics ---

def test_rasterize_bresenham():
    m = rasterize(np.array([[0, 0, 4, 2]]), [0.6], (8, 8))
    px = np.argwhere(m)
    # one pixel per column along the major axis, endpoints included
    assert sorted(px[:, 1].tolist()) == [0, 1, 2, 3, 4]
    assert [0, 0] in px.tolist() and [2, 4] in px.tolist()
    assert np.all(np.abs(px[:, 0] - px[:, 1] / 2) <= 0.5)
    assert set(np.unique(m)) == {0.0, 0.6}


def test_heatmap_examples(rng):
    gts = [WF(random_segments(rng, 4, 10, 118, 10)) for _ in range(2)]
    ap, f = heatmap_ap_f(gts, gts)
    assert (ap, f) == (1.0, 1.0)
    far = [WF([[0, 0, 10, 0]])], [WF([[100, 100, 120, 100]])]
    assert heatmap_ap_f(*far) == (0.0, 0.0)
    # one-pixel shifts across the segment direction stay within tolerance
    cross = [WF([[20, 10, 20, 60], [40, 30, 100, 30]])]
    shifted = [WF([[21, 10, 21, 60], [40, 31, 100, 31]])]
    assert 1 < HEATMAP_TOL
    assert heatmap_ap_f(shifted, cross) == (1.0, 1.0)


def test_heatmap_partial_precision():
    gt = [WF([[10, 10, 40, 10]])]
    pred = [WF([[10, 10, 40, 10], [10, 80, 40, 80]], [0.9, 0.5])]
    ap, f = heatmap_ap_f(pred, gt)
    # at cutoff 0.9: P = R = 1; adding the far segment only lowers precision
    assert ap == pytest.approx(1.0) and f == pytest.approx(1.0)
    ap2, f2 = heatmap_ap_f(pred, gt, cutoffs=[0.5])
    assert f2 == pytest.approx(2 * 0.5 / 1.5)


# --- repeatability ---

def test_repeatability_examples(rng):
    a = WF(random_segments(rng, 8, 10, 118, 8))
    r = repeatability(a, warp_wireframe(Homography.identity(), a, (128, 128)), Homography.identity())
    assert (r.rep, r.matched, r.total) == (1.0, 16, 16)
    assert r.loc == pytest.approx(0.0, abs=1e-12)
    e = repeatability(a, WF(NO_SEGS), Homography.identity())
    assert e.rep == 0.0 and math.isnan(e.loc) and e.matched == 0
    t = Homography.translation(1, 0)
    inner = WF(random_segments(rng, 8, 10, 110, 8))
    s = repeatability(inner, warp_wireframe(t, inner, (128, 128)), Homography.identity())
    assert s.rep == 1.0 and s.loc == pytest.approx(1.0)


def test_repeatability_eps_boundary():
    a = WF([[10, 10, 60, 10]])
    b = WF([[10, 15, 60, 15]])
    assert repeatability(a, b, Homography.identity(), eps=5).rep == 1.0
    assert repeatability(a, b, Homography.identity(), eps=4.99).rep == 0.0
    assert repeatability(a, b, Homography.identity(), metric="orthogonal", eps=10).rep == 1.0


def test_repeatability_symmetry(rng):
    for seed in range(10):
        h = sample_homography(seed, (128, 128))
        a = WF(random_segments(rng, 10, 0, 128, 8))
        b = WF(random_segments(rng, 10, 0, 128, 8))
        for metric in ("structural", "orthogonal"):
            fwd = repeatability(a, b, h, metric, eps=20)
            bwd = repeatability(b, a, h.inverse(), metric, eps=20)
            assert fwd.rep == pytest.approx(bwd.rep, abs=1e-12)
            assert fwd.matched == bwd.matched
            if fwd.matched:
                assert fwd.loc == pytest.approx(bwd.loc, abs=1e-9)


def test_repeatability_degenerate():
    class Flat:
        m = np.zeros((3, 3))

    with pytest.raises(DegenerateHomography):
        repeatability(WF(NO_SEGS), WF(NO_SEGS), Flat())


# --- homography sampler ---

def test_homography_deterministic():
    a = sample_homography(1234, (320, 240))
    b = sample_homography(1234, (320, 240))
    assert a.m.tobytes() == b.m.tobytes()
    assert sample_homography(1235, (320, 240)) != a


def test_homography_from_points_exact(rng):
    src = rng.uniform(0, 10, (4, 2))
    dst = rng.uniform(0, 10, (4, 2))
    h = Homography(homography_from_points(src, dst))
    for s, d in zip(src, dst):
        assert np.allclose(apply_homography(h, s), d, atol=1e-8)


def test_homography_patch_and_frame():
    w, hgt = 200, 150
    frame = [(0, 0), (0, hgt), (w, hgt), (w, 0)]
    for seed in range(200):
        h = sample_homography(seed, (w, hgt))
        back = np.array([apply_homography(h.inverse(), c) for c in frame])
        assert np.all(np.isfinite(back))
        assert np.all(np.abs(back) < 3 * max(w, hgt))
        fwd = np.array([apply_homography(h, c) for c in back])
        assert np.allclose(fwd, frame, atol=1e-6)


def test_homography_sampling_failure():
    with pytest.raises(SamplingFailed):
        sample_homography(0, (64, 64), max_attempts=0)
    with pytest.raises(ValueError):
        sample_homography(0, (0, 64))


def test_rotation_distribution():
    rng = np.random.default_rng(7)
    n = 10_000
    params = [sample_homography_params(rng) for _ in range(n)]
    angles = np.array([p.angle for p in params])
    sigma = math.pi / math.sqrt(12)
    assert abs(angles.mean()) < 3 * sigma / math.sqrt(n)
    assert angles.min() >= -math.pi / 2 and angles.max() <= math.pi / 2
    assert angles.std() == pytest.approx(sigma, rel=0.05)
    scales = np.array([p.scale for p in params])
    assert np.all(np.abs(scales - 1) <= 0.2 + 1e-12)
    assert np.all(np.abs([p.perspective for p in params]) <= 0.2 + 1e-12)
