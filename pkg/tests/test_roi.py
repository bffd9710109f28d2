import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbda.core import BBox, ImageBuffer
from pbda.errors import ValidationError
from pbda.roi import RoiSearchConfig, border_pixels, candidate_grid, roi_score, select_roi

from oracles import border_score, brute_force_roi, grid_positions, ring_coords


def _img(a):
    return ImageBuffer(a)


class TestBorder:
    def test_2x2(self):
        assert border_pixels(BBox(3, 4, 2, 2)) == [(3, 4), (4, 4), (4, 5), (3, 5)]

    def test_3x3_excludes_center(self):
        px = border_pixels(BBox(0, 0, 3, 3))
        assert len(px) == 8
        assert (1, 1) not in px
        assert px[0] == (0, 0)

    def test_4x6(self):
        assert len(border_pixels(BBox(1, 1, 4, 6))) == 16

    @pytest.mark.parametrize("w,h", [(2, 2), (3, 5), (7, 2), (9, 9)])
    def test_order_matches_oracle(self, w, h):
        assert border_pixels(BBox(2, 3, w, h)) == ring_coords(2, 3, w, h)

    def test_unique_and_on_perimeter(self):
        b = BBox(5, 6, 7, 4)
        px = border_pixels(b)
        assert len(set(px)) == len(px) == 2 * 7 + 2 * 4 - 4
        assert all(x in (5, 11) or y in (6, 9) for x, y in px)

    def test_degenerate(self):
        with pytest.raises(ValidationError):
            border_pixels(BBox(0, 0, 1, 5))


class TestScore:
    def test_identical_border_zero(self):
        rng = np.random.default_rng(0)
        a = rng.random((10, 10, 3))
        b = np.array(a)
        b[3:6, 3:6] = 0.0  # interiors may differ; 5x5 ring at (2,2) untouched except inside
        src = BBox(2, 2, 5, 5)
        a[3:6, 3:6] = 1.0
        assert roi_score(_img(a), src, _img(b), src) == 0.0

    def test_unit_color_difference(self):
        s = np.zeros((4, 4, 3))
        s[1:3, 1:3] = [1, 0, 0]
        t = np.zeros((4, 4, 3))
        assert roi_score(_img(s), BBox(1, 1, 2, 2), _img(t), BBox(0, 0, 2, 2)) == 1.0

    def test_random_vs_oracle(self):
        rng = np.random.default_rng(1)
        s, t = rng.random((9, 11, 3)), rng.random((12, 10, 3))
        src, cand = BBox(3, 2, 5, 4), BBox(4, 6, 5, 4)
        got = roi_score(_img(s), src, _img(t), cand)
        assert got == pytest.approx(border_score(s, (3, 2, 5, 4), t, (4, 6, 5, 4)), abs=1e-12)

    def test_symmetric(self):
        rng = np.random.default_rng(2)
        s, t = _img(rng.random((9, 9, 3))), _img(rng.random((9, 9, 3)))
        a, b = BBox(1, 2, 4, 3), BBox(3, 5, 4, 3)
        assert roi_score(s, a, t, b) == pytest.approx(roi_score(t, b, s, a), abs=1e-15)

    def test_dimension_mismatch(self):
        t = _img(np.zeros((8, 8, 3)))
        with pytest.raises(ValidationError):
            roi_score(t, BBox(1, 1, 3, 3), t, BBox(1, 1, 3, 4))


class TestSelect:
    def test_exact_copy_found(self):
        rng = np.random.default_rng(3)
        t = rng.random((30, 30, 3))
        s = rng.random((12, 12, 3))
        # plant the source's 6x5 box (ring included) at (17, 9) in the target
        t[9:14, 17:23] = s[2:7, 3:9]
        res = select_roi(_img(s), BBox(3, 2, 6, 5), _img(t), RoiSearchConfig(stride=1))
        assert res.bbox == BBox(17, 9, 6, 5)
        assert res.score == 0.0

    def test_single_window(self):
        rng = np.random.default_rng(4)
        t = _img(rng.random((7, 8, 3)))
        s = _img(rng.random((10, 10, 3)))
        res = select_roi(s, BBox(2, 2, 6, 5), t, RoiSearchConfig(stride=3))
        assert res.bbox == BBox(1, 1, 6, 5)
        assert res.candidates_evaluated == 1

    def test_infeasible(self):
        t = _img(np.zeros((6, 6, 3)))
        with pytest.raises(ValidationError, match="no feasible"):
            select_roi(t, BBox(1, 1, 5, 5), t)

    def test_64x64_stride4_vs_brute_force(self):
        rng = np.random.default_rng(5)
        t, s = rng.random((64, 64, 3)), rng.random((20, 20, 3))
        res = select_roi(_img(s), BBox(4, 5, 9, 9), _img(t), RoiSearchConfig(stride=4))
        x, y, score = brute_force_roi(s, (4, 5, 9, 9), t, stride=4)
        assert (res.bbox.x, res.bbox.y) == (x, y)
        assert res.score == pytest.approx(score, abs=1e-12)

    def test_grid_reaches_far_edge(self):
        ys, xs = candidate_grid(64, 50, 9, 9, RoiSearchConfig(stride=8))
        assert xs.tolist() == grid_positions(1, 54, 8)
        assert xs[-1] == 64 - 1 - 9 and ys[-1] == 50 - 1 - 9

    def test_ties_raster_order(self):
        t = _img(np.full((20, 20, 3), 0.5))
        s = _img(np.full((10, 10, 3), 0.5))
        res = select_roi(s, BBox(2, 2, 4, 4), t, RoiSearchConfig(stride=1))
        assert res.bbox == BBox(1, 1, 4, 4)

    def test_valid_mask_respected(self):
        rng = np.random.default_rng(6)
        t = rng.random((32, 32, 3))
        s = rng.random((12, 12, 3))
        t[2:7, 2:7] = s[2:7, 2:7]  # perfect match sits in the masked-out corner
        mask = np.ones((32, 32), bool)
        mask[:16, :16] = False
        res = select_roi(_img(s), BBox(2, 2, 5, 5), _img(t), RoiSearchConfig(stride=1, valid_mask=mask))
        b = res.bbox
        assert mask[b.y : b.y1, b.x : b.x1].all()
        assert res.score > 0
        unmasked = select_roi(_img(s), BBox(2, 2, 5, 5), _img(t), RoiSearchConfig(stride=1))
        assert unmasked.bbox == BBox(2, 2, 5, 5) and unmasked.score == 0.0

    def test_mask_excludes_everything(self):
        t = _img(np.zeros((10, 10, 3)))
        cfg = RoiSearchConfig(stride=1, valid_mask=np.zeros((10, 10), bool))
        with pytest.raises(ValidationError):
            select_roi(t, BBox(1, 1, 3, 3), t, cfg)

    def test_offset_shifts_grid(self):
        ys, xs = candidate_grid(40, 40, 8, 8, RoiSearchConfig(stride=8, offset=(3, 5)))
        assert xs.tolist() == [4, 12, 20, 28, 31]
        assert ys.tolist() == [6, 14, 22, 30, 31]

    def test_bad_stride(self):
        with pytest.raises(ValidationError):
            RoiSearchConfig(stride=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_coarse_grid_never_beats_fine(seed, stride):
    rng = np.random.default_rng(seed)
    t = _img(rng.random((int(rng.integers(12, 33)), int(rng.integers(12, 33)), 3)))
    s = _img(rng.random((12, 12, 3)))
    src = BBox(1, 1, int(rng.integers(2, 9)), int(rng.integers(2, 9)))
    fine = select_roi(s, src, t, RoiSearchConfig(stride=1))
    coarse = select_roi(s, src, t, RoiSearchConfig(stride=stride))
    assert coarse.score >= fine.score
    assert coarse.bbox.inside(t.width, t.height, margin=1)
