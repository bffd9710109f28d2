"""Independent reference computations used by the tests.

Nothing here imports the code paths it checks: the Poisson oracle builds
its dense matrix pixel by pixel, the ROI oracle double-loops, and so on.
"""

import math

import numpy as np


def dense_poisson(target, source, src_box, dst_box):
    """Dense solve of the guided Poisson equations for a rectangular region.

    ``target``/``source`` are H x W x 3 arrays; boxes are (x, y, w, h).
    Returns the (h, w, 3) interior solution and the dense (A, b).
    """
    sx, sy, w, h = src_box
    dx, dy, _, _ = dst_box
    n = w * h

    def unknown(r, c):
        return r * w + c

    A = np.zeros((n, n))
    b = np.zeros((n, 3))
    for r in range(h):
        for c in range(w):
            i = unknown(r, c)
            A[i, i] = 4.0
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                b[i] += source[sy + r, sx + c] - source[sy + rr, sx + cc]
                if 0 <= rr < h and 0 <= cc < w:
                    A[i, unknown(rr, cc)] = -1.0
                else:
                    b[i] += target[dy + rr, dx + cc]
    x = np.linalg.solve(A, b)
    return x.reshape(h, w, 3), A, b


def dense_composite(target, source, src_box, dst_box):
    """Full composite before clamping, using the dense oracle."""
    interior, _, _ = dense_poisson(target, source, src_box, dst_box)
    out = np.array(target, dtype=np.float64)
    dx, dy, w, h = dst_box
    out[dy : dy + h, dx : dx + w] = interior
    return out


def ring_coords(x, y, w, h):
    """Clockwise perimeter starting at the top-left corner, as (x, y)."""
    pts = []
    for i in range(w):
        pts.append((x + i, y))
    for j in range(1, h):
        pts.append((x + w - 1, y + j))
    for i in range(w - 2, -1, -1):
        pts.append((x + i, y + h - 1))
    for j in range(h - 2, 0, -1):
        pts.append((x, y + j))
    return pts


def border_score(source, src_box, target, cand_box):
    sx, sy, w, h = src_box
    cx, cy, _, _ = cand_box
    src_ring = ring_coords(sx, sy, w, h)
    dst_ring = ring_coords(cx, cy, w, h)
    total = 0.0
    for (px, py), (qx, qy) in zip(src_ring, dst_ring):
        acc = 0.0
        for ch in range(3):
            d = float(target[qy, qx, ch]) - float(source[py, px, ch])
            acc += d * d
        total += math.sqrt(acc)
    return total / len(src_ring)


def grid_positions(lo, hi, stride):
    """Stride-spaced positions from lo, plus hi if it was skipped."""
    out = []
    p = lo
    while p <= hi:
        out.append(p)
        p += stride
    if out[-1] != hi:
        out.append(hi)
    return out


def brute_force_roi(source, src_box, target, stride, margin=1):
    """(x, y, score) of the best window, scanning rows then columns."""
    _, _, w, h = src_box
    H, W = target.shape[:2]
    best = None
    for y in grid_positions(margin, H - margin - h, stride):
        for x in grid_positions(margin, W - margin - w, stride):
            s = border_score(source, src_box, target, (x, y, w, h))
            if best is None or s < best[2]:
                best = (x, y, s)
    return best


def euclid(a, b):
    return math.sqrt(math.fsum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def brute_force_pairs(query, candidates, k):
    """candidates: list of (id, vector). Full sort by (distance, id)."""
    scored = sorted(((euclid(query, v), cid) for cid, v in candidates), key=lambda t: (t[0], t[1]))
    return [(cid, d) for d, cid in scored[:k]]


def exhaustive_scores(source, src_box, target, stride, margin=1):
    """Score every grid window at once: (ys, xs, scores[ny, nx])."""
    sx, sy, w, h = src_box
    H, W = target.shape[:2]
    ys = np.array(grid_positions(margin, H - margin - h, stride))
    xs = np.array(grid_positions(margin, W - margin - w, stride))
    ring = ring_coords(0, 0, w, h)
    total = np.zeros((len(ys), len(xs)))
    for dx, dy in ring:
        window = target[ys[:, None] + dy, xs[None, :] + dx]
        total += np.sqrt(((window - source[sy + dy, sx + dx]) ** 2).sum(axis=-1))
    return ys, xs, total / len(ring)
