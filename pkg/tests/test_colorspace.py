import itertools

import numpy as np
import pytest

from ghostkit import colorspace


def as_pixel(r, g, b):
    return np.array([[[r, g, b]]], dtype=np.uint8)


class TestForward:
    @pytest.mark.parametrize(
        "rgb,expected",
        [
            ((0, 0, 0), (16.0, 128.0, 128.0)),
            ((255, 255, 255), (235.045, 128.0, 128.0)),
            ((255, 0, 0), (81.535, 90.26, 239.945)),
            ((0, 255, 0), (144.52, 53.795, 34.16)),
            ((0, 0, 255), (40.99, 239.945, 109.895)),
        ],
    )
    def test_golden_triples(self, rgb, expected):
        got = colorspace.rgb_to_ycbcr(as_pixel(*rgb))[0, 0]
        assert np.abs(got - np.array(expected)).max() <= 1e-9

    def test_constant_image_stays_constant(self):
        img = np.full((20, 30, 3), 77, dtype=np.uint8)
        planes = colorspace.rgb_to_ycbcr(img)
        for c in range(3):
            assert np.ptp(planes[:, :, c]) == 0.0

    def test_gray_ramp_has_neutral_chroma(self):
        grays = np.stack([np.arange(256, dtype=np.uint8)] * 3, axis=1).reshape(1, 256, 3)
        planes = colorspace.rgb_to_ycbcr(grays)
        assert np.abs(planes[:, :, 1] - 128.0).max() <= 1e-9
        assert np.abs(planes[:, :, 2] - 128.0).max() <= 1e-9

    def test_output_ranges(self):
        rng = np.random.default_rng(5)
        planes = colorspace.rgb_to_ycbcr(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8))
        assert planes[:, :, 0].min() >= 16.0 - 1e-9
        assert planes[:, :, 0].max() <= 235.045 + 1e-9
        for c in (1, 2):
            assert planes[:, :, c].min() >= 16.0 - 1e-9
            assert planes[:, :, c].max() <= 240.0 + 1e-9


class TestInverse:
    def test_inverse_golden(self):
        black = np.array([[[16.0, 128.0, 128.0]]])
        white = np.array([[[235.045, 128.0, 128.0]]])
        assert tuple(colorspace.ycbcr_to_rgb(black)[0, 0]) == (0, 0, 0)
        assert tuple(colorspace.ycbcr_to_rgb(white)[0, 0]) == (255, 255, 255)

    def test_roundtrip_identity_corners_and_sample(self):
        corners = np.array(
            list(itertools.product([0, 255], repeat=3)), dtype=np.uint8
        ).reshape(8, 1, 3)
        assert np.array_equal(corners, colorspace.ycbcr_to_rgb(colorspace.rgb_to_ycbcr(corners)))
        rng = np.random.default_rng(11)
        arr = rng.integers(0, 256, (500, 500, 3), dtype=np.uint8)
        assert np.array_equal(arr, colorspace.ycbcr_to_rgb(colorspace.rgb_to_ycbcr(arr)))

    def test_out_of_range_values_clamped(self):
        hot = np.array([[[300.0, 128.0, 128.0]]])
        cold = np.array([[[-50.0, 128.0, 128.0]]])
        assert colorspace.ycbcr_to_rgb(hot).max() == 255
        assert colorspace.ycbcr_to_rgb(cold).min() == 0

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            colorspace.ycbcr_to_rgb(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            colorspace.rgb_to_ycbcr(np.zeros((4, 4, 4), dtype=np.uint8))
