"""Pure numpy implementations of the hot kernels.

Must stay algorithmically identical to ``_ckernels.pyx``; the test suite
cross-checks the two backends.
"""

import numpy as np


def stencil_matvec(neighbors, x):
    """Return A @ x for the 5-point operator (4 on the diagonal, -1 per in-region neighbor)."""
    n = x.shape[0]
    ext = np.zeros(n + 1, dtype=np.float64)
    ext[:n] = x
    nb = np.where(neighbors < 0, n, neighbors)
    return 4.0 * x - ext[nb].sum(axis=1)


def cg_solve(neighbors, b, tol, max_iter):
    """Conjugate gradient from a zero initial guess.

    Stops once the true residual satisfies ||b - A x|| <= tol * ||b||; the
    recursive residual is only trusted as a trigger for that check.
    Returns ``(x, iterations, relative_residual)``.
    """
    neighbors = np.ascontiguousarray(neighbors, dtype=np.int32)
    b = np.ascontiguousarray(b, dtype=np.float64)
    n = b.shape[0]
    x = np.zeros(n, dtype=np.float64)
    bb = float(np.dot(b, b))
    if bb == 0.0:
        return x, 0, 0.0
    nb = np.where(neighbors < 0, n, neighbors)
    ext = np.zeros(n + 1, dtype=np.float64)

    def matvec(v):
        ext[:n] = v
        return 4.0 * v - ext[nb].sum(axis=1)

    thresh = tol * tol * bb
    r = b.copy()
    p = r.copy()
    rr = bb
    it = 0
    while True:
        if rr <= thresh:
            r_true = b - matvec(x)
            rr_true = float(np.dot(r_true, r_true))
            if rr_true <= thresh:
                return x, it, float(np.sqrt(rr_true / bb))
            # recursive residual drifted; restart from the true one
            r = r_true
            p = r.copy()
            rr = rr_true
        if it >= max_iter:
            break
        ap = matvec(p)
        pap = float(np.dot(p, ap))
        if pap <= 0.0:
            break
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        rr_new = float(np.dot(r, r))
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    r_true = b - matvec(x)
    return x, it, float(np.sqrt(np.dot(r_true, r_true) / bb))


def roi_scores(target, src_border, offsets, ys, xs):
    """Mean border color distance for every window anchored at (ys[i], xs[j]).

    ``offsets`` holds (dy, dx) per border pixel relative to the window's
    top-left corner; ``src_border`` the matching source colors (M x 3).
    """
    target = np.ascontiguousarray(target, dtype=np.float64)
    src_border = np.ascontiguousarray(src_border, dtype=np.float64)
    dy = np.asarray(offsets[:, 0], dtype=np.intp)
    dx = np.asarray(offsets[:, 1], dtype=np.intp)
    ys = np.asarray(ys, dtype=np.intp)
    xs = np.asarray(xs, dtype=np.intp)
    m = src_border.shape[0]
    out = np.empty((ys.shape[0], xs.shape[0]), dtype=np.float64)
    cols = xs[:, None] + dx[None, :]
    for i, y in enumerate(ys):
        win = target[y + dy[None, :], cols]  # (len(xs), M, 3)
        diff = win - src_border[None, :, :]
        out[i] = np.sqrt((diff * diff).sum(axis=2)).sum(axis=1) / m
    return out
