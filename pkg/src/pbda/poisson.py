"""Discrete guided-Poisson solver and seamless cloning.

The blended region is the full destination box; its Dirichlet boundary is
the one-pixel ring just outside the box in the target image. Each unknown
``p`` gets the 5-point equation

    4 f_p - sum_{q in N_p, q inside} f_q
        = sum_{q in N_p, q on ring} target_q + sum_{q in N_p} (src_p - src_q)

solved per RGB channel with conjugate gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .core import BBox, ImageBuffer
from .errors import ConvergenceError, ValidationError

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class PoissonSystem:
    """Sparse SPD system for one blend job.

    ``neighbors[i]`` lists the in-region neighbors of unknown ``i`` in the
    order (up, down, left, right), -1 where the neighbor lies on the ring;
    every listed neighbor carries coefficient -1 and the diagonal is 4.
    ``rhs`` has shape (3, n); ``index_map[i]`` is the (x, y) target pixel.
    """

    n: int
    neighbors: np.ndarray
    rhs: np.ndarray
    index_map: np.ndarray
    dst_bbox: BBox

    def matvec(self, x) -> np.ndarray:
        return kernels.stencil_matvec(self.neighbors, np.asarray(x, dtype=np.float64))

    def stencil(self, i: int) -> list:
        return [(int(j), -1.0) for j in self.neighbors[i] if j >= 0]


@dataclass(frozen=True)
class SolveResult:
    values: np.ndarray  # (n, 3)
    iterations: tuple
    residuals: tuple


@dataclass(frozen=True)
class BlendResult:
    image: ImageBuffer
    raw: np.ndarray  # (h, w, 3) interior solution before clamping
    solve: SolveResult


def grid_neighbors(w: int, h: int) -> np.ndarray:
    """Neighbor table for a w x h rectangle of unknowns in raster order."""
    idx = np.arange(w * h, dtype=np.int32).reshape(h, w)
    nb = np.full((h, w, 4), -1, dtype=np.int32)
    nb[1:, :, 0] = idx[:-1, :]
    nb[:-1, :, 1] = idx[1:, :]
    nb[:, 1:, 2] = idx[:, :-1]
    nb[:, :-1, 3] = idx[:, 1:]
    return nb.reshape(w * h, 4)


def _check_pair(source: ImageBuffer, src_bbox: BBox, target: ImageBuffer, dst_bbox: BBox):
    if (src_bbox.w, src_bbox.h) != (dst_bbox.w, dst_bbox.h):
        raise ValidationError(
            f"dimension mismatch: source box {src_bbox.w}x{src_bbox.h} "
            f"vs destination box {dst_bbox.w}x{dst_bbox.h}"
        )
    src_bbox.check_attached(source.width, source.height, "source bbox")
    dst_bbox.check_attached(target.width, target.height, "destination bbox")


def _padded(image: ImageBuffer, b: BBox) -> np.ndarray:
    return image.data[b.y - 1 : b.y1 + 1, b.x - 1 : b.x1 + 1]


def _ring_sum(pad: np.ndarray) -> np.ndarray:
    """Per interior pixel, the sum of its 4-neighbors that fall on the ring."""
    h, w = pad.shape[0] - 2, pad.shape[1] - 2
    out = np.zeros((h, w, 3), dtype=np.float64)
    out[0, :] += pad[0, 1:-1]
    out[-1, :] += pad[-1, 1:-1]
    out[:, 0] += pad[1:-1, 0]
    out[:, -1] += pad[1:-1, -1]
    return out


def _laplacian(pad: np.ndarray) -> np.ndarray:
    """sum over the 4-neighborhood of (g_p - g_q) for each interior pixel."""
    c = pad[1:-1, 1:-1]
    # per-edge differences keep a constant patch exactly zero
    return (c - pad[:-2, 1:-1]) + (c - pad[2:, 1:-1]) + (c - pad[1:-1, :-2]) + (c - pad[1:-1, 2:])


def _system(dst_bbox: BBox, rhs_grid: np.ndarray) -> PoissonSystem:
    w, h = dst_bbox.w, dst_bbox.h
    ys, xs = np.mgrid[0:h, 0:w]
    index_map = np.stack([xs.ravel() + dst_bbox.x, ys.ravel() + dst_bbox.y], axis=1)
    rhs = np.ascontiguousarray(rhs_grid.reshape(w * h, 3).T)
    return PoissonSystem(
        n=w * h,
        neighbors=grid_neighbors(w, h),
        rhs=rhs,
        index_map=index_map,
        dst_bbox=dst_bbox,
    )


def assemble_system(target: ImageBuffer, source: ImageBuffer, src_bbox: BBox, dst_bbox: BBox) -> PoissonSystem:
    _check_pair(source, src_bbox, target, dst_bbox)
    rhs = _ring_sum(_padded(target, dst_bbox)) + _laplacian(_padded(source, src_bbox))
    return _system(dst_bbox, rhs)


def assemble_correction_system(target: ImageBuffer, source: ImageBuffer, src_bbox: BBox, dst_bbox: BBox) -> PoissonSystem:
    """Laplace system for the correction term: zero interior source, ring values target - source."""
    _check_pair(source, src_bbox, target, dst_bbox)
    mismatch = _padded(target, dst_bbox) - _padded(source, src_bbox)
    return _system(dst_bbox, _ring_sum(mismatch))


def solve_system(system: PoissonSystem, tol: float = DEFAULT_TOL, max_iter: Optional[int] = None) -> SolveResult:
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if max_iter is None:
        max_iter = 10 * system.n
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    values = np.empty((system.n, 3), dtype=np.float64)
    iters, resids = [], []
    for c in range(3):
        x, it, res = kernels.cg_solve(system.neighbors, system.rhs[c], tol, max_iter)
        if res > tol:
            raise ConvergenceError(it, res, tol)
        values[:, c] = x
        iters.append(int(it))
        resids.append(float(res))
    return SolveResult(values, tuple(iters), tuple(resids))


def _composite(target: ImageBuffer, dst_bbox: BBox, interior: np.ndarray) -> ImageBuffer:
    out = np.array(target.data)
    out[dst_bbox.y : dst_bbox.y1, dst_bbox.x : dst_bbox.x1] = np.clip(interior, 0.0, 1.0)
    return ImageBuffer(out)


def poisson_blend(source, src_bbox, target, dst_bbox, tol=DEFAULT_TOL, max_iter=None) -> BlendResult:
    system = assemble_system(target, source, src_bbox, dst_bbox)
    sol = solve_system(system, tol, max_iter)
    raw = sol.values.reshape(dst_bbox.h, dst_bbox.w, 3)
    return BlendResult(_composite(target, dst_bbox, raw), raw, sol)


def correction_blend(source, src_bbox, target, dst_bbox, tol=DEFAULT_TOL, max_iter=None) -> BlendResult:
    """Blend as source + harmonic interpolant of the boundary mismatch."""
    system = assemble_correction_system(target, source, src_bbox, dst_bbox)
    sol = solve_system(system, tol, max_iter)
    correction = sol.values.reshape(dst_bbox.h, dst_bbox.w, 3)
    g = source.data[src_bbox.y : src_bbox.y1, src_bbox.x : src_bbox.x1]
    raw = g + correction
    return BlendResult(_composite(target, dst_bbox, raw), raw, sol)


def seamless_clone(source, src_bbox, target, dst_bbox, tol=DEFAULT_TOL, max_iter=None) -> ImageBuffer:
    return poisson_blend(source, src_bbox, target, dst_bbox, tol, max_iter).image


def seamless_clone_via_correction(source, src_bbox, target, dst_bbox, tol=DEFAULT_TOL, max_iter=None) -> ImageBuffer:
    return correction_blend(source, src_bbox, target, dst_bbox, tol, max_iter).image
