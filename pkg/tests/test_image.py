import numpy as np
import pytest

from earforge.exceptions import BadFactorError, SingularMapError
from earforge.image import (
    AffineMap,
    adjust_contrast,
    affine_resample,
    bilinear_sample,
    flip_horizontal,
    load_image,
    save_image,
)


def ramp(h, w):
    return np.linspace(0, 1, h * w).reshape(h, w)


class TestBilinearSample:
    def test_grid_points_exact(self, rng):
        img = rng.random((7, 9))
        for y in range(7):
            for x in range(9):
                assert bilinear_sample(img, x, y) == img[y, x]

    def test_outside_returns_fill(self, rng):
        img = rng.random((5, 5))
        assert bilinear_sample(img, -5.0, 3.0) == 0.0
        assert bilinear_sample(img, 2.0, 5.5) == 0.0
        assert bilinear_sample(img, 4.0001, 2.0) == 0.0

    def test_midpoint_linear(self):
        img = np.array([[0.2, 0.6]])
        assert bilinear_sample(img, 0.5, 0.0) == pytest.approx(0.4, abs=1e-15)

    def test_continuity_in_interior(self, rng):
        img = rng.random((16, 16))
        x, y = 7.3, 8.6
        base = bilinear_sample(img, x, y)
        for eps in (1e-6, -1e-6):
            assert abs(bilinear_sample(img, x + eps, y) - base) < 1e-5
            assert abs(bilinear_sample(img, x, y + eps) - base) < 1e-5

    def test_vectorized_matches_scalar(self, rng):
        img = rng.random((12, 10))
        xs = rng.uniform(-2, 11, size=50)
        ys = rng.uniform(-2, 13, size=50)
        vals = bilinear_sample(img, xs, ys)
        for x, y, v in zip(xs, ys, vals):
            assert v == bilinear_sample(img, float(x), float(y))


class TestAffineResample:
    def test_identity_is_bit_exact(self, rng):
        img = rng.random((20, 24))
        out = affine_resample(img, AffineMap.identity(), 24, 20)
        assert np.array_equal(out, img)

    def test_translation_shifts_with_zero_fill(self):
        img = ramp(4, 6)
        amap = AffineMap(np.eye(2), np.array([1.0, 0.0]))
        out = affine_resample(img, amap, 6, 4)
        assert np.allclose(out[:, :5], img[:, 1:])
        assert np.all(out[:, 5] == 0.0)

    def test_downscale_constant_stays_constant(self):
        img = np.full((8, 8), 0.37)
        amap = AffineMap(2.0 * np.eye(2), np.zeros(2))
        out = affine_resample(img, amap, 4, 4)
        assert np.allclose(out, 0.37)

    def test_singular_map_rejected(self, rng):
        img = rng.random((5, 5))
        bad = AffineMap(np.array([[1.0, 1.0], [1.0, 1.0]]), np.zeros(2))
        with pytest.raises(SingularMapError):
            affine_resample(img, bad, 5, 5)


class TestAffineMap:
    def test_compose_and_inverse_round_trip(self, rng):
        a = AffineMap(rng.normal(size=(2, 2)) + 2 * np.eye(2), rng.normal(size=2))
        b = AffineMap.rotation(0.7, center=(3.0, -1.0))
        pts = rng.normal(size=(10, 2))
        assert np.allclose(a.compose(b).apply(pts), a.apply(b.apply(pts)))
        assert np.allclose(a.inverse().apply(a.apply(pts)), pts, atol=1e-12)

    def test_rotation_preserves_center(self):
        m = AffineMap.rotation(1.1, center=(5.0, 7.0))
        assert np.allclose(m.apply(np.array([5.0, 7.0])), [5.0, 7.0])


class TestFlipHorizontal:
    def test_involution(self, rng):
        img = rng.random((9, 13))
        assert np.array_equal(flip_horizontal(flip_horizontal(img)), img)

    def test_row_reversal(self):
        img = np.array([[0.1, 0.2, 0.3]])
        assert np.allclose(flip_horizontal(img), [[0.3, 0.2, 0.1]])

    def test_symmetric_image_unchanged(self):
        img = np.array([[0.1, 0.5, 0.1], [0.2, 0.9, 0.2]])
        assert np.array_equal(flip_horizontal(img), img)

    def test_preserves_intensity_multiset(self, rng):
        img = rng.random((6, 8))
        assert np.array_equal(np.sort(flip_horizontal(img).ravel()),
                              np.sort(img.ravel()))


class TestAdjustContrast:
    def test_factor_one_identity(self, rng):
        img = rng.random((5, 5))
        assert np.allclose(adjust_contrast(img, 1.0), img)

    def test_constant_image_unchanged(self):
        img = np.full((4, 4), 0.42)
        assert np.allclose(adjust_contrast(img, 1.5), img)

    def test_two_pixel_analytic(self):
        img = np.array([[0.4, 0.6]])
        assert np.allclose(adjust_contrast(img, 1.5), [[0.35, 0.65]])

    def test_bad_factor_rejected(self, rng):
        img = rng.random((3, 3))
        for bad in (0.49, 1.51, -1.0):
            with pytest.raises(BadFactorError):
                adjust_contrast(img, bad)


class TestImageIO:
    def test_pgm_round_trip(self, tmp_path, rng):
        img = np.round(rng.random((11, 7)) * 255) / 255
        path = tmp_path / "img.pgm"
        save_image(img, path)
        back = load_image(path)
        assert np.allclose(back, img, atol=1e-9)

    def test_png_round_trip(self, tmp_path, rng):
        img = np.round(rng.random((8, 12)) * 255) / 255
        path = tmp_path / "img.png"
        save_image(img, path)
        back = load_image(path)
        assert np.allclose(back, img, atol=1e-9)

    def test_color_png_luma(self, tmp_path):
        from PIL import Image as PILImage

        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[0, 0] = (255, 0, 0)
        rgb[0, 1] = (0, 255, 0)
        rgb[1, 0] = (0, 0, 255)
        rgb[1, 1] = (255, 255, 255)
        path = tmp_path / "color.png"
        PILImage.fromarray(rgb, mode="RGB").save(path)
        out = load_image(path)
        assert out[0, 0] == pytest.approx(0.299, abs=1e-6)
        assert out[0, 1] == pytest.approx(0.587, abs=1e-6)
        assert out[1, 0] == pytest.approx(0.114, abs=1e-6)
        assert out[1, 1] == pytest.approx(1.0, abs=1e-6)
