"""Sliding-window placement of a source box in a target image.

Each candidate window is scored by the mean RGB Euclidean distance between
its perimeter pixels and the source box's perimeter pixels, paired by
position along the clockwise ring.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .core import BBox, ImageBuffer
from .errors import ValidationError


@dataclass(frozen=True)
class RoiSearchConfig:
    stride: int = 8
    valid_mask: Optional[np.ndarray] = None
    margin: int = 1
    # grid origin shift in [0, stride); lets repeated searches land elsewhere
    offset: tuple = (0, 0)

    def __post_init__(self):
        if self.stride < 1:
            raise ValidationError(f"stride must be >= 1, got {self.stride}")
        if self.margin < 0:
            raise ValidationError(f"margin must be >= 0, got {self.margin}")
        if any(o < 0 for o in self.offset):
            raise ValidationError(f"offset must be non-negative, got {self.offset}")


@dataclass(frozen=True)
class RoiResult:
    bbox: BBox
    score: float
    candidates_evaluated: int


def border_offsets(w: int, h: int) -> np.ndarray:
    """(dy, dx) of the perimeter, clockwise from the top-left corner."""
    if w < 2 or h < 2:
        raise ValidationError(f"degenerate bbox {w}x{h}: border needs w >= 2 and h >= 2")
    top = [(0, dx) for dx in range(w)]
    right = [(dy, w - 1) for dy in range(1, h)]
    bottom = [(h - 1, dx) for dx in range(w - 2, -1, -1)]
    left = [(dy, 0) for dy in range(h - 2, 0, -1)]
    return np.array(top + right + bottom + left, dtype=np.int64)


def border_pixels(b: BBox) -> list:
    """Perimeter (x, y) coordinates, length 2w + 2h - 4."""
    return [(b.x + int(dx), b.y + int(dy)) for dy, dx in border_offsets(b.w, b.h)]


def _border_colors(image: ImageBuffer, b: BBox) -> np.ndarray:
    off = border_offsets(b.w, b.h)
    return image.data[b.y + off[:, 0], b.x + off[:, 1]]


def roi_score(source: ImageBuffer, src_bbox: BBox, target: ImageBuffer, cand: BBox) -> float:
    if (cand.w, cand.h) != (src_bbox.w, src_bbox.h):
        raise ValidationError(
            f"dimension mismatch: candidate {cand.w}x{cand.h} vs source {src_bbox.w}x{src_bbox.h}"
        )
    if not src_bbox.inside(source.width, source.height):
        raise ValidationError(f"source bbox {src_bbox.to_list()} out of bounds")
    if not cand.inside(target.width, target.height):
        raise ValidationError(f"candidate bbox {cand.to_list()} out of bounds")
    diff = _border_colors(target, cand) - _border_colors(source, src_bbox)
    return float(np.sqrt((diff * diff).sum(axis=1)).mean())


def _axis_positions(lo: int, hi: int, stride: int, offset: int) -> np.ndarray:
    start = lo + (offset % stride)
    pos = list(range(start, hi + 1, stride)) if start <= hi else []
    if not pos or pos[-1] != hi:
        pos.append(hi)
    return np.array(pos, dtype=np.int64)


def candidate_grid(target_w: int, target_h: int, w: int, h: int, cfg: RoiSearchConfig):
    """Top-left x and y positions of every window the search visits."""
    m = cfg.margin
    x_hi, y_hi = target_w - m - w, target_h - m - h
    if x_hi < m or y_hi < m:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    xs = _axis_positions(m, x_hi, cfg.stride, cfg.offset[0])
    ys = _axis_positions(m, y_hi, cfg.stride, cfg.offset[1])
    return ys, xs


def _mask_ok(mask: np.ndarray, ys, xs, w: int, h: int) -> np.ndarray:
    """Boolean (len(ys), len(xs)): window lies entirely on True mask pixels."""
    bad = (~mask.astype(bool)).astype(np.int64)
    integral = np.zeros((bad.shape[0] + 1, bad.shape[1] + 1), dtype=np.int64)
    integral[1:, 1:] = bad.cumsum(0).cumsum(1)
    y0, x0 = ys[:, None], xs[None, :]
    count = (
        integral[y0 + h, x0 + w] - integral[y0, x0 + w] - integral[y0 + h, x0] + integral[y0, x0]
    )
    return count == 0


def select_roi(source: ImageBuffer, src_bbox: BBox, target: ImageBuffer, cfg: RoiSearchConfig = RoiSearchConfig()) -> RoiResult:
    w, h = src_bbox.w, src_bbox.h
    if not src_bbox.inside(source.width, source.height):
        raise ValidationError(f"source bbox {src_bbox.to_list()} out of bounds")
    ys, xs = candidate_grid(target.width, target.height, w, h, cfg)
    if ys.size == 0 or xs.size == 0:
        raise ValidationError(
            f"no feasible {w}x{h} window in {target.width}x{target.height} target "
            f"with margin {cfg.margin}"
        )
    feasible = np.ones((ys.size, xs.size), dtype=bool)
    if cfg.valid_mask is not None:
        mask = np.asarray(cfg.valid_mask)
        if mask.shape != (target.height, target.width):
            raise ValidationError(
                f"valid_mask shape {mask.shape} != target shape {(target.height, target.width)}"
            )
        feasible = _mask_ok(mask, ys, xs, w, h)
        if not feasible.any():
            raise ValidationError("no feasible window inside valid_mask")

    offsets = border_offsets(w, h)
    scores = kernels.roi_scores(target.data, _border_colors(source, src_bbox), offsets, ys, xs)
    scores = np.where(feasible, scores, np.inf)
    # argmin returns the first minimum in row-major order: smallest y, then x
    k = int(np.argmin(scores))
    i, j = divmod(k, xs.size)
    return RoiResult(
        bbox=BBox(int(xs[j]), int(ys[i]), w, h),
        score=float(scores[i, j]),
        candidates_evaluated=int(feasible.sum()),
    )
