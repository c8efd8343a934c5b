"""Small independent reference implementations shared by several test modules."""

import math

import numpy as np


def point_segment_distance(p, a, b):
    """Clamped projection written from scratch (no shared code with the library)."""
    ax, ay = a
    bx, by = b
    vx, vy = bx - ax, by - ay
    L2 = vx * vx + vy * vy
    t = ((p[0] - ax) * vx + (p[1] - ay) * vy) / L2
    t_cl = min(1.0, max(0.0, t))
    fx, fy = ax + t_cl * vx, ay + t_cl * vy
    return math.hypot(p[0] - fx, p[1] - fy), t


def best_pairing_sq(a, b):
    s = (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2 + (a[3] - b[3]) ** 2
    w = (a[0] - b[2]) ** 2 + (a[1] - b[3]) ** 2 + (a[2] - b[0]) ** 2 + (a[3] - b[1]) ** 2
    return min(s, w)


def random_segments(rng, n, low=0.0, high=64.0, min_len=1.0):
    """``(n, 4)`` random segments with length at least ``min_len``."""
    out = []
    while len(out) < n:
        s = rng.uniform(low, high, 4)
        if np.hypot(s[2] - s[0], s[3] - s[1]) >= min_len:
            out.append(s)
    return np.array(out).reshape(-1, 4)
