import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mitovol.errors import InconsistentFieldError, InvalidParameterError, UndefinedIndexError
from mitovol.fusion import Detection
from mitovol.imaging import Resolution, TileRect
from mitovol.mvindex import (
    RoiSpec,
    WeibelGrid,
    build_report,
    epithelium_fraction,
    field_partition,
    k_coefficient,
    mv_index_fields,
    mv_index_single,
    weibel_estimate,
    weibel_points,
)
from mitovol.synthetic import left_fraction_mask, scattered_fraction_mask

from conftest import mask_of


class TestKCoefficient:
    def test_ten_hpf_roi_area(self):
        assert abs(k_coefficient(2.37) - 42.194092827) < 1e-9

    def test_simple_values(self):
        assert k_coefficient(100.0) == 1.0
        assert k_coefficient(1.0) == 100.0

    @pytest.mark.parametrize("bad", [0.0, -2.5, float("inf"), float("nan")])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(InvalidParameterError):
            k_coefficient(bad)

    @given(a=st.floats(1e-6, 1e6, allow_nan=False))
    @settings(max_examples=200)
    def test_product_identity(self, a):
        assert abs(k_coefficient(a) * a - 100.0) <= 100.0 * 1e-12


class TestEpitheliumFraction:
    def test_extremes_and_half(self):
        full = mask_of(np.ones((8, 8), bool))
        empty = mask_of(np.zeros((8, 8), bool))
        region = TileRect(0, 0, 8, 8)
        assert epithelium_fraction(full, region) == 100.0
        assert epithelium_fraction(empty, region) == 0.0
        half = np.zeros((8, 8), bool)
        half[:, :4] = True
        assert epithelium_fraction(mask_of(half), region) == 50.0

    def test_region_out_of_bounds(self):
        with pytest.raises(InvalidParameterError):
            epithelium_fraction(mask_of(np.ones((4, 4), bool)), TileRect(0, 0, 5, 4))

    def test_additive_over_power_of_two_partition(self, rng):
        bits = rng.random((64, 64)) < 0.37
        mask = mask_of(bits)
        whole = epithelium_fraction(mask, TileRect(0, 0, 64, 64))
        parts = [TileRect(0, 0, 32, 64), TileRect(32, 0, 32, 64)]
        weighted = sum(epithelium_fraction(mask, r) * r.area for r in parts) / (64 * 64)
        assert weighted == whole


class TestMvIndexSingle:
    def test_zero_count(self):
        assert mv_index_single(0, 50.0, k_coefficient(2.37)) == 0.0

    def test_full_epithelium_is_per_mm2(self):
        k = k_coefficient(2.37)
        assert math.isclose(mv_index_single(24, 100.0, k), 24 / 2.37, rel_tol=1e-15)

    def test_worked_example(self):
        assert math.isclose(
            mv_index_single(10, 50.0, k_coefficient(2.37)), 8.438818565, rel_tol=1e-9
        )

    def test_zero_vv_undefined(self):
        with pytest.raises(UndefinedIndexError):
            mv_index_single(3, 0.0, 42.0)

    @given(
        mc=st.integers(0, 1000),
        vv=st.floats(1e-3, 100.0),
        c=st.floats(0.01, 100.0),
    )
    @settings(max_examples=200)
    def test_homogeneity(self, mc, vv, c):
        k = k_coefficient(2.37)
        base = mv_index_single(mc, vv, k)
        assert math.isclose(mv_index_single(mc, c * vv, k), base / c, rel_tol=1e-12)
        scaled_mc = mv_index_single(3 * mc, vv, k)
        assert math.isclose(scaled_mc, 3 * base, rel_tol=1e-12)


class TestMvIndexFields:
    def test_single_field_reduces(self):
        k = k_coefficient(2.37)
        assert mv_index_fields([(7, 42.0)], k) == mv_index_single(7, 42.0, k)

    def test_two_identical_fields(self):
        assert math.isclose(mv_index_fields([(5, 50.0), (5, 50.0)], 1.0), 0.2, rel_tol=1e-12)

    def test_empty_sum(self):
        assert mv_index_fields([], 10.0) == 0.0

    def test_skips_empty_fields(self):
        assert mv_index_fields([(0, 0.0), (5, 50.0)], 1.0) == pytest.approx(0.1)

    def test_mitoses_without_epithelium_error(self):
        with pytest.raises(InconsistentFieldError):
            mv_index_fields([(1, 0.0)], 1.0)


class TestWeibel:
    def test_full_and_empty(self):
        grid = WeibelGrid(n_points=432, offset=(0.3, 0.7))
        assert weibel_estimate(mask_of(np.ones((100, 100), bool)), grid) == 1.0
        assert weibel_estimate(mask_of(np.zeros((100, 100), bool)), grid) == 0.0

    def test_half_mask_even_columns_exact(self):
        # 400 points on a square region: 20x20 lattice, no dropped points,
        # offset 0.5 puts 10 of 20 columns strictly left of the midline.
        mask = left_fraction_mask(640, 640, 0.5)
        grid = WeibelGrid(n_points=400, offset=(0.5, 0.5))
        assert weibel_estimate(mask, grid) == 0.5

    def test_points_lie_inside(self):
        grid = WeibelGrid(n_points=432, offset=(0.99, 0.99))
        pts = weibel_points(grid, 123, 77)
        assert pts.shape == (432, 2)
        assert pts[:, 0].min() >= 0 and pts[:, 0].max() < 123
        assert pts[:, 1].min() >= 0 and pts[:, 1].max() < 77

    def test_non_square_layout_tracks_aspect(self):
        pts = weibel_points(WeibelGrid(n_points=432), 2000, 1000)
        # Near-square cells: spacing in x and y within a factor ~1.5.
        xs = np.unique(pts[:, 0])
        ys = np.unique(pts[:, 1])
        dx = np.diff(xs).mean()
        dy = np.diff(ys).mean()
        assert 0.6 < dx / dy < 1.6

    def test_unbiased_over_random_offsets(self, rng):
        mask = scattered_fraction_mask(640, 640, 0.3, rng)
        grid_rng = np.random.default_rng(7)
        estimates = [
            weibel_estimate(mask, WeibelGrid(n_points=432,
                                             offset=(grid_rng.random(), grid_rng.random())))
            for _ in range(300)
        ]
        assert abs(statistics.fmean(estimates) - 0.3) < 0.01

    def test_invalid_points(self):
        with pytest.raises(InvalidParameterError):
            WeibelGrid(n_points=0)

    def test_invalid_offset(self):
        with pytest.raises(InvalidParameterError):
            WeibelGrid(n_points=10, offset=(1.0, 0.0))


class TestFieldPartition:
    def test_ten_fields_is_2x5(self):
        rects = field_partition(100, 40, 10)
        assert len(rects) == 10
        assert len({r.y for r in rects}) == 2 and len({r.x for r in rects}) == 5

    def test_twelve_fields_is_3x4(self):
        rects = field_partition(120, 90, 12)
        assert len({r.y for r in rects}) == 3 and len({r.x for r in rects}) == 4

    def test_prime_count_is_single_row(self):
        rects = field_partition(70, 10, 7)
        assert len({r.y for r in rects}) == 1 and len(rects) == 7

    def test_partition_covers_exactly(self):
        rects = field_partition(103, 57, 10)
        canvas = np.zeros((57, 103), dtype=int)
        for r in rects:
            canvas[r.slices] += 1
        assert np.all(canvas == 1)

    def test_row_major_indexing(self):
        rects = field_partition(100, 40, 10)
        keys = [(r.y, r.x) for r in rects]
        assert keys == sorted(keys)


def _det_at(cx, cy, score=0.9):
    return Detection(cx - 2.0, cy - 2.0, 4.0, 4.0, score)


class TestBuildReport:
    def test_uniform_mask_no_detections(self):
        mask = mask_of(np.ones((100, 100), bool))
        report = build_report(mask, [], [], RoiSpec(microns_per_pixel=Resolution(1.0)), 0.5)
        assert report.mv_mean == 0.0 and report.mv_std == 0.0
        assert report.mv_whole_roi == 0.0
        assert report.mc_total == 0 and report.mc_kept == 0
        assert report.vv_mean == 100.0 and report.vv_std == 0.0

    def test_single_field_mean_equals_whole(self):
        mask = mask_of(np.ones((60, 60), bool))
        dets = [_det_at(10, 10), _det_at(40, 40)]
        roi = RoiSpec(area_mm2=2.37, microns_per_pixel=Resolution(1.0), n_fields=1)
        report = build_report(mask, dets, dets, roi, 0.5)
        assert report.mv_mean == report.mv_whole_roi
        assert report.mv_std == 0.0

    def test_two_field_worked_example_consistent_semantics(self):
        # Fields (mc=2, vv=50) and (mc=0, vv=50) with A=2.37:
        # k_field = 100/1.185 = 84.38818565...; mv1 = k*2/50 = 3.3755274...;
        # mean = pop std = 1.6877637130801688. (The *100 variant arises only
        # if vv is fed as a unit fraction, which contradicts the percent
        # convention pinned by the whole-ROI per-mm2 identity.)
        bits = np.zeros((50, 100), bool)
        bits[:, 0:25] = True   # left half of field 0
        bits[:, 50:75] = True  # left half of field 1
        mask = mask_of(bits)
        kept = [_det_at(10, 25), _det_at(20, 25)]
        roi = RoiSpec(area_mm2=2.37, microns_per_pixel=Resolution(1.0), n_fields=2)
        report = build_report(mask, kept, kept, roi, 0.5)
        assert [f.mc for f in report.fields] == [2, 0]
        assert [f.vv_percent for f in report.fields] == [50.0, 50.0]
        k_field = 100.0 / (2.37 / 2)
        assert math.isclose(report.fields[0].mv, k_field * 2 / 50.0, rel_tol=1e-12)
        assert math.isclose(report.mv_mean, 1.6877637130801688, rel_tol=1e-9)
        assert math.isclose(report.mv_std, 1.6877637130801688, rel_tol=1e-9)

    def test_field_counts_follow_centers(self):
        mask = mask_of(np.ones((40, 100), bool))
        kept = [_det_at(5, 5), _det_at(95, 35), _det_at(95, 5)]
        roi = RoiSpec(area_mm2=1.0, microns_per_pixel=Resolution(1.0), n_fields=10)
        report = build_report(mask, kept, kept, roi, 0.5)
        by_field = {f.field_index: f.mc for f in report.fields if f.mc}
        assert by_field == {0: 1, 4: 1, 9: 1}

    def test_field_without_epithelium_but_with_mitoses_raises(self):
        bits = np.zeros((50, 100), bool)
        bits[:, 0:50] = True  # field 0 fully epithelial, field 1 empty
        kept = [_det_at(75, 25)]
        roi = RoiSpec(area_mm2=2.37, microns_per_pixel=Resolution(1.0), n_fields=2)
        with pytest.raises(InconsistentFieldError):
            build_report(mask_of(bits), kept, kept, roi, 0.5)

    def test_empty_field_is_undefined_not_error(self):
        bits = np.zeros((50, 100), bool)
        bits[:, 0:50] = True
        roi = RoiSpec(area_mm2=2.37, microns_per_pixel=Resolution(1.0), n_fields=2)
        report = build_report(mask_of(bits), [], [], roi, 0.5)
        assert report.fields[1].mv is None
        assert report.fields[0].mv == 0.0

    def test_zero_epithelium_raises(self):
        roi = RoiSpec(microns_per_pixel=Resolution(1.0))
        with pytest.raises(UndefinedIndexError):
            build_report(mask_of(np.zeros((20, 50), bool)), [], [], roi, 0.5)

    def test_detection_scale_mapping(self):
        # Detections at 0.25 um/px, mask at 0.5 um/px: scale 0.5.
        mask_bits = np.ones((50, 50), bool)
        roi = RoiSpec(area_mm2=1.0, microns_per_pixel=Resolution(0.25), n_fields=1)
        mask = mask_of(mask_bits, mpp=0.5)
        kept = [_det_at(99, 99)]  # center (99, 99) -> mask pixel (49, 49)
        report = build_report(mask, kept, kept, roi, 0.5)
        assert report.fields[0].mc == 1
