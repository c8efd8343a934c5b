import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hawp.errors import DegenerateEncoding, EmptyWireframe, InvalidParameters, ShapeMismatch
from hawp.geometry import LineSegment, Wireframe
from hawp.hatfield import (
    HatField,
    assign_regions,
    decode_field,
    decode_jacobian,
    decode_point,
    denormalize,
    encode_field,
    encode_point,
    lattice_shape,
    merge_duplicate_lines,
    normalize,
    rectified_distances,
)
from hawp.synth import generate
from tests.helpers import random_segments

HALF_PI = math.pi / 2
S = LineSegment.from_coords


def same_segment(a, b, tol):
    a = np.asarray(a)
    b = np.asarray(b)
    return min(np.abs(a - b).max(), np.abs(a - b[[2, 3, 0, 1]]).max()) < tol


# --- point codec ---

def test_encode_examples():
    assert encode_point((0, 0), S(1, 1, 1, -1)) == pytest.approx((1, 0, math.pi / 4, -math.pi / 4))
    assert encode_point((0, 0), S(-1, 1, 1, 1)) == pytest.approx((1, HALF_PI, math.pi / 4, -math.pi / 4))


def test_encode_orders_endpoints_canonically():
    # swapping endpoints of the input segment does not change the code
    assert encode_point((0, 0), S(1, -1, 1, 1)) == encode_point((0, 0), S(1, 1, 1, -1))


@pytest.mark.parametrize("v, p, expected", [
    ((1, 0, math.pi / 4, -math.pi / 4), (0, 0), (1, 1, 1, -1)),
    ((1, 0, math.pi / 4, -math.pi / 4), (2, 3), (3, 4, 3, 2)),
    ((1, HALF_PI, math.pi / 4, -math.pi / 4), (0, 0), (-1, 1, 1, 1)),
])
def test_decode_examples(v, p, expected):
    assert decode_point(p, v).as_array() == pytest.approx(expected, abs=1e-12)


def test_encode_errors():
    with pytest.raises(DegenerateEncoding):
        encode_point((1, 0), S(1, -1, 1, 1))  # on the segment
    with pytest.raises(DegenerateEncoding):
        encode_point((0, 5), S(1, -1, 1, 1))  # foot clamps to an endpoint
    with pytest.raises(DegenerateEncoding):
        encode_point((0, 1), S(1, -1, 1, 1))  # foot exactly on an endpoint


@pytest.mark.parametrize("v", [
    (0, 0, 0.5, -0.5), (-1, 0, 0.5, -0.5), (1, 0, 0, -0.5), (1, 0, HALF_PI, -0.5),
    (1, 0, 0.5, 0.1), (1, 0, 0.5, -HALF_PI),
])
def test_decode_invalid(v):
    with pytest.raises(InvalidParameters):
        decode_point((0, 0), v)


def test_theta2_zero_is_valid():
    seg = decode_point((0, 0), (1, 0, 0.5, 0.0))
    assert seg.x2 == pytest.approx((1, 0))


@given(st.tuples(*[st.floats(-100, 100)] * 4), st.floats(0.001, 0.999), st.floats(0.05, 30), st.booleans())
def test_round_trip_property(c, t, off, left):
    a, b = np.array(c[:2]), np.array(c[2:])
    length = np.linalg.norm(b - a)
    assume(length > 1e-2)
    n = np.array([-(b - a)[1], (b - a)[0]]) / length
    p = a + t * (b - a) + (off if left else -off) * n
    seg = S(*c)
    v = encode_point(p, seg)
    assert -math.pi <= v[1] < math.pi
    assert 0 < v[2] < HALF_PI and -HALF_PI < v[3] <= 0
    out = decode_point(p, v)
    assert same_segment(out.as_array(), c, 1e-9 * max(1.0, length / 10))


def test_normalisation_bijective(rng):
    v = np.stack([rng.uniform(1e-6, 5, 1000), rng.uniform(-math.pi, math.pi, 1000),
                  rng.uniform(1e-6, HALF_PI, 1000), rng.uniform(-HALF_PI + 1e-6, 0, 1000)], axis=1)
    n = normalize(v, 5.0)
    assert n.min() >= 0 and n.max() <= 1
    assert np.abs(denormalize(n, 5.0) - v).max() < 1e-12


def test_normalize_clamps_distance():
    assert normalize([[7.0, 0, 0.5, -0.5]], 5.0)[0, 0] == 1.0


# --- jacobian ---

def test_jacobian_examples():
    j = decode_jacobian((0, 0), (1, 0, math.pi / 4, -math.pi / 4))
    assert j[0:2, 0] == pytest.approx((1, 1))
    assert j[0:2, 2] == pytest.approx((0, 2))
    # x1 does not depend on theta2 and x2 not on theta1
    assert j[0:2, 3] == pytest.approx((0, 0))
    assert j[2:4, 2] == pytest.approx((0, 0))


def central_difference(p, v, h=1e-6):
    out = np.zeros((4, 4))
    for k in range(4):
        vp = np.array(v, dtype=np.float64)
        vm = vp.copy()
        vp[k] += h
        vm[k] -= h
        out[:, k] = (decode_point(p, vp).as_array() - decode_point(p, vm).as_array()) / (2 * h)
    return out


def test_jacobian_finite_differences(rng):
    for _ in range(200):
        v = (rng.uniform(0.1, 5), rng.uniform(-math.pi, math.pi), rng.uniform(0.01, HALF_PI - 0.05),
             rng.uniform(-HALF_PI + 0.05, -1e-3))
        p = rng.uniform(-10, 10, 2)
        j = decode_jacobian(p, v)
        fd = central_difference(p, v)
        assert np.abs(j - fd).max() / np.abs(j).max() < 1e-4


def test_jacobian_rejects_near_vertical():
    with pytest.raises(InvalidParameters):
        decode_jacobian((0, 0), (1, 0, HALF_PI - 1e-8, -0.5))


# --- attraction regions ---

def brute_force_regions(segs, width_s, height_s, tau_d, d_min):
    """Pixel-by-segment scan; the arithmetic mirrors the library's so ties resolve identically."""
    labels = np.full((height_s, width_s), -1)
    for r in range(height_s):
        for c in range(width_s):
            best, who, interior = math.inf, -1, False
            for k, (x1, y1, x2, y2) in enumerate(segs):
                dx, dy = x2 - x1, y2 - y1
                t = ((c - x1) * dx + (r - y1) * dy) / (dx * dx + dy * dy)
                if t <= 0.0:
                    fx, fy = x1, y1
                elif t >= 1.0:
                    fx, fy = x2, y2
                else:
                    fx, fy = x1 + t * dx, y1 + t * dy
                ex, ey = c - fx, r - fy
                d = math.sqrt(ex * ex + ey * ey)
                if d < best:
                    best, who, interior = d, k, 0.0 < t < 1.0
            if interior and d_min <= best <= tau_d:
                labels[r, c] = who
    return labels


def test_regions_single_horizontal_segment():
    wf = Wireframe.from_arrays(64, 64, [[-4, 32, 68, 32]])
    lab = assign_regions(wf, 16, 16, 5.0, 0.05, 4).labels
    rows_fg = [r for r in range(16) if (lab[r] >= 0).all()]
    assert rows_fg == [3, 4, 5, 6, 7, 9, 10, 11, 12, 13]
    assert (lab[8] == -1).all()


def test_regions_tie_goes_to_lower_index():
    wf = Wireframe.from_arrays(64, 64, [[-4, 16, 68, 16], [-4, 48, 68, 48]])
    lab = assign_regions(wf, 16, 16, 5.0, 0.05, 4).labels
    assert (lab[8] == 0).all()
    wf2 = Wireframe.from_arrays(64, 64, [[-4, 48, 68, 48], [-4, 16, 68, 16]])
    assert (assign_regions(wf2, 16, 16, 5.0, 0.05, 4).labels[8] == 0).all()


def test_regions_brute_force(rng):
    for _ in range(20):
        n = int(rng.integers(1, 11))
        segs = random_segments(rng, n, 0, 256, 2)
        wf = Wireframe.from_arrays(256, 256, segs)
        reg = assign_regions(wf, 64, 64, 5.0, 0.05, 4)
        assert np.array_equal(reg.labels, brute_force_regions(segs / 4, 64, 64, 5.0, 0.05))


def test_regions_empty():
    with pytest.raises(EmptyWireframe):
        assign_regions(Wireframe(10, 10), 3, 3)


# --- field codec ---

def test_encode_field_matches_point_oracle():
    wf = Wireframe.from_arrays(64, 64, [[10, 6, 50, 42]])
    f = encode_field(wf, 4, 5.0, 0.05, dtype=np.float64)
    seg = S(*(wf.segment_array()[0] / 4))
    checked = 0
    for r in range(16):
        for c in range(16):
            if f.mask[r, c]:
                v = normalize(encode_point((c, r), seg), 5.0)
                assert (f.d[r, c], f.theta[r, c], f.theta1[r, c], f.theta2[r, c]) == pytest.approx(tuple(v), abs=1e-15)
                checked += 1
            else:
                assert f.d[r, c] == f.theta[r, c] == f.theta1[r, c] == f.theta2[r, c] == 0
    assert checked > 20
    assert not f.delta_d.any()


def test_encode_field_distance_boundary():
    # lattice point (2, 2) is exactly tau_d = 2 away from x = 16 / 4 = 4
    wf = Wireframe.from_arrays(32, 32, [[16, -4, 16, 36]])
    f = encode_field(wf, 4, 2.0, 0.05)
    assert f.mask[2, 2] == 1 and f.d[2, 2] == 1.0
    assert f.mask[2, 1] == 0 and f.d[2, 1] == 0


def test_field_invariants():
    wf = generate("polygons", 3).wireframe
    f = encode_field(wf)
    assert f.shape == (64, 64) == lattice_shape(256, 256, 4)[::-1]
    for plane in (f.d, f.theta, f.theta1, f.theta2):
        assert plane.min() >= 0 and plane.max() <= 1
        assert not plane[f.mask == 0].any()
    raw = denormalize(np.stack([f.d, f.theta, f.theta1, f.theta2], -1)[f.foreground()], f.tau_d)
    assert (raw[:, 0] > 0).all() and (raw[:, 0] <= f.tau_d).all()
    assert (raw[:, 2] > 0).all() and (raw[:, 2] < HALF_PI).all()
    assert (raw[:, 3] > -HALF_PI).all() and (raw[:, 3] <= 0).all()


def test_hatfield_shape_check():
    with pytest.raises(ShapeMismatch):
        HatField(4, 3, 4, 5.0, *[np.zeros((4, 3))] * 6)


def test_rectified_distances_example():
    r = rectified_distances(0.5, 0.1, [-2, -1, 0, 1, 2])
    assert r == pytest.approx([0.3, 0.4, 0.5, 0.6, 0.7])


def _gt_lines(wf, f):
    labels = assign_regions(wf, f.width_s, f.height_s, f.tau_d).labels.ravel()
    return wf.segment_array()[labels[labels >= 0]]


def test_decode_field_float64_exact():
    wf = generate("cube", 1).wireframe
    f = encode_field(wf, dtype=np.float64)
    dec = decode_field(f, [0])
    gt = _gt_lines(wf, f)
    err = np.minimum(np.abs(dec.lines - gt).max(1), np.abs(dec.lines - gt[:, [2, 3, 0, 1]]).max(1))
    assert err.max() < 1e-9


def test_decode_field_float32_error_is_storage_limited():
    wf = generate("lines", 4).wireframe
    f32 = encode_field(wf)
    f64 = encode_field(wf, dtype=np.float64)
    dec = decode_field(f32, [0])
    gt = _gt_lines(wf, f32)
    assert dec.skipped == 0
    fg = f64.foreground()
    exact = denormalize(np.stack([f64.d, f64.theta, f64.theta1, f64.theta2], -1)[fg], f64.tau_d)
    stored = denormalize(np.stack([f32.d, f32.theta, f32.theta1, f32.theta2], -1)[fg].astype(np.float64), f32.tau_d)
    pts = np.argwhere(fg)[:, ::-1]
    err = np.minimum(np.abs(dec.lines - gt).max(1), np.abs(dec.lines - gt[:, [2, 3, 0, 1]]).max(1))
    for k in range(len(err)):
        jac = decode_jacobian(pts[k], exact[k])
        # first-order propagation of the actual float32 rounding, plus slack for second-order terms
        bound = 2 * f32.stride * np.abs(jac @ (stored[k] - exact[k])).max() + 1e-5
        assert err[k] <= bound
    assert np.mean(err < 1e-3) > 0.99


def test_decode_field_cardinality():
    wf = generate("star", 2).wireframe
    f = encode_field(wf)
    rng = np.random.default_rng(0)
    f.delta_d[:] = np.where(f.mask > 0, rng.uniform(0, 0.3, f.shape), 0).astype(np.float32)
    scales = [-2, -1, 0, 1, 2]
    dec = decode_field(f, scales)
    n_fg = int(f.foreground().sum())
    assert len(dec.lines) == len(scales) * n_fg - dec.skipped
    assert dec.skipped > 0
    assert len(dec.origins) == len(dec.scales) == len(dec.lines)


def test_merge_duplicate_lines():
    lines = np.array([[0, 0, 10, 0], [10, 0, 0, 0.01], [0, 0, 10, 0.02], [5, 5, 9, 9]], dtype=float)
    keep, scores = merge_duplicate_lines(lines, 0.05, [0.1, 0.9, 0.3, 0.5])
    assert keep.tolist() == [0, 3]
    assert scores.tolist() == [0.9, 0.5]
