import numpy as np
import pytest
from PIL import Image

from ghostkit import analysis, codec, colorspace, evalharness, forge, synth
from .conftest import make_composite


class TestSweepConfig:
    def test_default_grid(self):
        assert analysis.SweepConfig().qualities() == list(range(30, 101, 2))

    def test_validation(self):
        with pytest.raises(ValueError):
            analysis.SweepConfig(80, 60, 2)
        with pytest.raises(ValueError):
            analysis.SweepConfig(30, 100, 0)
        with pytest.raises(ValueError):
            analysis.SweepConfig(30, 101, 2)
        with pytest.raises(ValueError):
            analysis.SweepConfig(30, 99, 2)  # range not divisible by step


class TestDifferenceMap:
    def test_identical_inputs_give_zero(self, natural_image):
        dmap = analysis.difference_map(natural_image, natural_image, 50)
        assert dmap.planes.max() == 0.0

    def test_matches_two_line_oracle(self):
        rng = np.random.default_rng(13)
        a = rng.integers(0, 256, (16, 24, 3), dtype=np.uint8)
        b = rng.integers(0, 256, (16, 24, 3), dtype=np.uint8)
        dmap = analysis.difference_map(a, b, 75)
        oracle = np.abs(colorspace.rgb_to_ycbcr(a) - colorspace.rgb_to_ycbcr(b)) ** 3
        assert np.array_equal(dmap.planes, oracle)

    def test_gray_pair_hits_only_luma(self):
        a = np.full((8, 8, 3), 100, dtype=np.uint8)
        b = np.full((8, 8, 3), 102, dtype=np.uint8)
        dmap = analysis.difference_map(a, b, 50)
        assert dmap.planes[:, :, 0] == pytest.approx((0.859 * 2) ** 3, abs=1e-9)
        assert dmap.planes[:, :, 1:].max() <= 1e-30

    def test_dimension_mismatch_rejected(self, natural_image):
        with pytest.raises(ValueError):
            analysis.difference_map(natural_image, natural_image[:-8], 50)

    def test_quality_recorded_and_bounds_checked(self):
        zeros = np.zeros((4, 4, 3))
        assert analysis.DifferenceMap(zeros, 42).quality == 42
        with pytest.raises(ValueError):
            analysis.DifferenceMap(zeros - 1.0, 42)


class TestRunSweep:
    def test_shape_and_order(self, natural_image):
        sweep = analysis.run_sweep(natural_image, analysis.SweepConfig(60, 80, 10))
        assert sweep.qualities == [60, 70, 80]
        assert [m.quality for m in sweep.maps] == [60, 70, 80]
        assert len(sweep.curve.samples) == 3

    def test_worker_count_does_not_change_results(self, natural_image):
        cfg = analysis.SweepConfig(50, 80, 10)
        serial = analysis.run_sweep(natural_image, cfg, jobs=1)
        threaded = analysis.run_sweep(natural_image, cfg, jobs=4)
        assert serial.curve == threaded.curve
        for a, b in zip(serial.maps, threaded.maps):
            assert np.array_equal(a.planes, b.planes)

    def test_untampered_global_minimum_at_own_quality(self, small_images):
        cfg = analysis.SweepConfig(40, 100, 10)
        img = codec.resave(small_images[0], 70)
        sweep = analysis.run_sweep(img, cfg)
        energies = sweep.curve.energy_values
        assert sweep.qualities[int(np.argmin(energies))] == 70


class TestBinarize:
    def rect_map(self, value=1000.0, shape=(192, 256)):
        planes = np.zeros(shape + (3,))
        planes[60 : 60 + 64, 90 : 90 + 64, 0] = value
        return analysis.DifferenceMap(planes, 50)

    def test_all_zero_map_is_degenerate(self):
        mask = analysis.binarize(analysis.DifferenceMap(np.zeros((32, 32, 3)), 50))
        assert mask.degenerate and not mask.bits.any()

    def test_constant_map_is_degenerate(self):
        mask = analysis.binarize(analysis.DifferenceMap(np.full((32, 32, 3), 7.0), 50))
        assert mask.degenerate and not mask.bits.any()

    def test_two_level_rectangle_is_exact(self):
        dmap = self.rect_map()
        mask = analysis.binarize(dmap)
        expected = dmap.planes[:, :, 0] > 0
        assert np.array_equal(mask.bits, expected)
        assert not mask.degenerate

    def test_uniform_noise_is_degenerate(self):
        rng = np.random.default_rng(7)
        planes = rng.uniform(0.0, 2.0, (64, 64, 3))
        mask = analysis.binarize(analysis.DifferenceMap(planes, 50))
        assert mask.degenerate and not mask.bits.any()

    def test_mask_never_exceeds_nonzero_support(self):
        rng = np.random.default_rng(19)
        sparse = np.zeros((48, 48, 3))
        idx = rng.integers(0, 48, (2, 200))
        sparse[idx[0], idx[1], 0] = rng.uniform(10, 1000, 200)
        for dmap in (self.rect_map(), analysis.DifferenceMap(sparse, 60)):
            mask = analysis.binarize(dmap)
            assert mask.true_pixels() <= int((dmap.summed() > 0).sum())


class TestLocalize:
    def test_composite_recovers_quality_and_region(self, small_composite):
        comp, truth = small_composite
        result = analysis.localize(comp, analysis.SweepConfig(40, 90, 2))
        assert abs(result.quality - 60) <= 2
        assert evalharness.score_mask(result.mask, truth).iou >= 0.5
        assert result.estimate is not None
        assert result.sweep is not None

    def test_aligned_ghost_reaches_high_confidence(self, natural_image):
        comp, truth = make_composite(natural_image, 60, 80)  # rect (64,40) is 8-aligned
        result = analysis.localize(comp, analysis.SweepConfig(40, 90, 2))
        assert result.confidence == "high"
        assert result.reason == ""

    def test_untampered_image_yields_empty_mask(self, small_images):
        img = codec.resave(small_images[1], 70)
        result = analysis.localize(img, analysis.SweepConfig(40, 90, 2))
        assert result.mask.bits.mean() < 0.01
        assert result.confidence == "low"

    def test_same_quality_composite_flagged_low(self, small_images):
        comp, _ = make_composite(small_images[2], 70, 70, rect=(65, 41, 48, 48))
        result = analysis.localize(comp, analysis.SweepConfig(40, 90, 2))
        assert result.confidence == "low"

    def test_estimation_failure_falls_back_to_global_minimum(self, small_images):
        # a never-compressed image has monotone curves: no interior extremum
        result = analysis.localize(small_images[3], analysis.SweepConfig(40, 90, 2))
        assert result.estimate is None
        assert result.confidence == "low"
        assert "extremum" in result.reason
        assert result.quality in range(40, 91, 2)


class TestExports:
    def test_mask_png_round_trip(self, tmp_path):
        bits = np.zeros((30, 40), dtype=bool)
        bits[5:15, 10:30] = True
        path = tmp_path / "mask.png"
        analysis.export_mask_png(analysis.TamperMask(bits), path)
        assert np.array_equal(analysis.load_mask_png(path), bits)
        raw = np.array(Image.open(path))
        assert set(np.unique(raw)) == {0, 255}

    def test_difference_png_is_16bit_and_monotone(self, tmp_path):
        planes = np.zeros((16, 16, 3))
        planes[2, 2, 0] = 255.0**3
        planes[4, 4, 0] = 1000.0
        path = tmp_path / "dmap.png"
        analysis.export_difference_png(analysis.DifferenceMap(planes, 50), path)
        arr = np.array(Image.open(path))
        assert arr.dtype == np.uint16
        assert arr[2, 2] > arr[4, 4] > arr[0, 0] == 0
        # documented scaling: 65535 * log1p(D) / log1p(3 * 255^3)
        expected = round(65535 * np.log1p(1000.0) / np.log1p(3 * 255.0**3))
        assert arr[4, 4] == expected
