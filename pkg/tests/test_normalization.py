import numpy as np
import pytest
from scipy import stats

from earforge.exceptions import BadPctError, BadWindowError, ZeroWidthError
from earforge.geometry import PoseFrame, principal_frame
from earforge.image import AffineMap, affine_resample, bilinear_sample
from earforge.normalization import (
    CropWindow,
    crop_detector_input,
    geometric_normal_map,
    jitter_window,
    landmark_crop_window,
    normalize_geometric,
)
from earforge.synthetic import make_pose, random_ear_shape, render_ear
from conftest import random_landmarks


def upright_frame(sqrt_l1, sqrt_l2, center=(80.0, 80.0)):
    return PoseFrame(center=np.asarray(center), axis1=np.array([0.0, -1.0]),
                     axis2=np.array([1.0, 0.0]),
                     lambda1=sqrt_l1 ** 2, lambda2=sqrt_l2 ** 2)


class TestNormalizeGeometric:
    def test_isotropic_unit_scale_is_centered_crop(self, rng):
        img = rng.random((160, 160))
        frame = upright_frame(32.0, 32.0)
        amap = geometric_normal_map(frame)
        out = affine_resample(img, amap, 128, 128)
        # 2*32 source px hit 64 output px: scale 1, so output == crop around center.
        crop = img[80 - 64 : 80 + 64, 80 - 64 : 80 + 64]
        assert out.shape == (128, 128)
        assert np.allclose(out, crop, atol=1e-12)

    def test_anisotropic_scales(self):
        frame = upright_frame(32.0, 16.0)
        amap = geometric_normal_map(frame)
        # d(source)/d(out_x) = 0.5 (horizontal magnification 2), vertical 1.0.
        assert np.allclose(amap.matrix @ np.array([1.0, 0.0]), [0.5, 0.0], atol=1e-12)
        assert np.allclose(amap.matrix @ np.array([0.0, 1.0]), [0.0, 1.0], atol=1e-12)

    def test_center_maps_to_output_center(self, ear_sample):
        img, lm = ear_sample
        out, amap = normalize_geometric(img, lm, return_map=True)
        frame = principal_frame(lm)
        back = amap.inverse().apply(frame.center)
        assert np.allclose(back, [64.0, 64.0], atol=1e-6)
        assert out.shape == (128, 128)

    def test_rotated_scene_matches(self):
        # Same ear rendered at two orientations normalizes to the same image.
        shape = random_ear_shape(np.random.default_rng(3))
        pose_a = make_pose((80.0, 80.0), scale=45.0, angle_deg=0.0)
        pose_b = make_pose((80.0, 80.0), scale=45.0, angle_deg=25.0)
        img_a, lm_a = render_ear(shape, pose_a, 160)
        img_b, lm_b = render_ear(shape, pose_b, 160)
        out_a = normalize_geometric(img_a, lm_a)
        out_b = normalize_geometric(img_b, lm_b)
        assert np.mean(np.abs(out_a - out_b)) < 0.02

    def test_width_compression_mostly_cancelled(self):
        # Pose proxy: 25% horizontal compression; normalized widths differ < 3%.
        shape = random_ear_shape(np.random.default_rng(5))
        pose_a = make_pose((80.0, 80.0), scale=45.0, width_factor=1.0)
        pose_b = make_pose((80.0, 80.0), scale=45.0, width_factor=0.75)
        img_a, lm_a = render_ear(shape, pose_a, 160)
        img_b, lm_b = render_ear(shape, pose_b, 160)
        _, map_a = normalize_geometric(img_a, lm_a, return_map=True)
        _, map_b = normalize_geometric(img_b, lm_b, return_map=True)
        width_a = np.ptp(map_a.inverse().apply(lm_a)[:, 0])
        width_b = np.ptp(map_b.inverse().apply(lm_b)[:, 0])
        raw_width_a = np.ptp(lm_a[:, 0])
        raw_width_b = np.ptp(lm_b[:, 0])
        assert abs(raw_width_b / raw_width_a - 1.0) > 0.2  # compression visible
        assert abs(width_b / width_a - 1.0) < 0.03          # mostly cancelled

    def test_zero_width_rejected(self):
        frame = upright_frame(32.0, 0.0)
        with pytest.raises(ZeroWidthError):
            geometric_normal_map(frame)


class TestCropDetectorInput:
    def test_aligned_window_is_pixel_copy(self, rng):
        img = rng.random((160, 160))
        win = CropWindow(center=(47.5 + 20, 47.5 + 30), size=96.0)
        out = crop_detector_input(img, win)
        assert np.array_equal(out, img[30 : 30 + 96, 20 : 20 + 96])

    def test_oversized_window_zero_border(self, rng):
        img = rng.random((40, 40))
        win = CropWindow(center=(19.5, 19.5), size=80.0)
        out = crop_detector_input(img, win)
        assert out.shape == (96, 96)
        assert np.all(out[0] == 0.0) and np.all(out[:, 0] == 0.0)
        assert out[48, 48] > 0.0

    def test_scale_factor_on_ramp(self, rng):
        img = np.tile(np.linspace(0, 1, 160), (160, 1))
        size = 48.0
        win = CropWindow(center=(80.0, 80.0), size=size)
        out, amap = crop_detector_input(img, win, return_map=True)
        # Direct bilinear oracle: output (u, v) samples the mapped source point.
        us = np.arange(96)
        expected = [bilinear_sample(img, *amap.apply(np.array([u, 50.0])))
                    for u in us]
        assert np.allclose(out[50], expected, atol=1e-12)
        assert amap.matrix[0, 0] == pytest.approx(size / 96.0)

    def test_bad_window(self):
        with pytest.raises(BadWindowError):
            CropWindow(center=(0, 0), size=0.0)


class TestJitterWindow:
    def test_zero_pct_identity(self):
        win = CropWindow(center=(50.0, 60.0), size=40.0)
        out = jitter_window(win, 0.0, rng_seed=1)
        assert out.center == win.center and out.size == win.size

    def test_bounds_and_determinism(self):
        win = CropWindow(center=(50.0, 60.0), size=40.0)
        a = jitter_window(win, 0.2, rng_seed=7)
        b = jitter_window(win, 0.2, rng_seed=7)
        assert a == b
        assert abs(a.center[0] - 50.0) <= 0.2 * 40.0
        assert abs(a.center[1] - 60.0) <= 0.2 * 40.0
        assert 0.8 * 40.0 <= a.size <= 1.2 * 40.0

    def test_offsets_uniform_ks(self):
        win = CropWindow(center=(0.0, 0.0), size=10.0)
        pct = 0.4
        draws = [jitter_window(win, pct, rng_seed=s) for s in range(10_000)]
        xs = np.array([w.center[0] for w in draws]) / (pct * win.size)
        sizes = (np.array([w.size for w in draws]) / win.size - 1.0) / pct
        for sample in (xs, sizes):
            p = stats.kstest(sample, stats.uniform(loc=-1, scale=2).cdf).pvalue
            assert p > 0.01

    def test_bad_pct(self):
        win = CropWindow(center=(0.0, 0.0), size=10.0)
        with pytest.raises(BadPctError):
            jitter_window(win, 1.5, rng_seed=0)


class TestLandmarkCropWindow:
    def test_bbox_center_and_size(self, rng):
        pts = random_landmarks(rng, center=(70, 90), spread=(20, 8))
        win = landmark_crop_window(pts, margin=1.0)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        assert win.center == ((lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2)
        assert win.size == pytest.approx(max(hi - lo))
