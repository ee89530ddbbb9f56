import json

import numpy as np
import pytest

from earforge.exceptions import (
    BadDiagonalError,
    DegenerateLandmarksError,
    EmptyInputError,
)
from earforge.geometry import (
    bbox_diagonal,
    ced_curve,
    load_landmarks,
    normalized_error,
    principal_frame,
    save_landmarks,
    upright_align,
)
from conftest import random_landmarks


def repeat_to_55(points):
    points = np.asarray(points, dtype=np.float64)
    reps = -(-55 // len(points))
    return np.tile(points, (reps, 1))[:55]


def eigh_oracle(pts):
    """Independent dense eigensolver route for the 2x2 landmark covariance."""
    d = pts - pts.mean(axis=0)
    cov = d.T @ d / len(pts)
    w, v = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


class TestPrincipalFrame:
    def test_diagonal_covariance_axes(self):
        # 54 points on the x-extremes plus fillers: variance dominated by x.
        pts = repeat_to_55([(-10.0, 0.0), (10.0, 0.0), (0.0, -2.0), (0.0, 2.0)])
        frame = principal_frame(pts)
        assert abs(frame.axis1 @ np.array([1.0, 0.0])) > 0.999
        w, _ = eigh_oracle(pts)
        assert frame.lambda1 == pytest.approx(w[0], rel=1e-12)
        assert frame.lambda2 == pytest.approx(w[1], rel=1e-12)

    def test_rotation_equivariance(self, rng):
        pts = random_landmarks(rng, spread=(25.0, 8.0))
        theta = 0.6
        rot = np.array([[np.cos(theta), -np.sin(theta)],
                        [np.sin(theta), np.cos(theta)]])
        f0 = principal_frame(pts)
        f1 = principal_frame(pts @ rot.T)
        assert f1.lambda1 == pytest.approx(f0.lambda1, abs=1e-9)
        assert f1.lambda2 == pytest.approx(f0.lambda2, abs=1e-9)
        rotated_axis = rot @ f0.axis1
        assert min(np.linalg.norm(f1.axis1 - rotated_axis),
                   np.linalg.norm(f1.axis1 + rotated_axis)) < 1e-9

    def test_matches_dense_eigensolver(self, rng):
        for _ in range(25):
            pts = random_landmarks(rng, spread=(rng.uniform(5, 40), rng.uniform(1, 4)),
                                   angle=rng.uniform(0, np.pi))
            frame = principal_frame(pts)
            w, v = eigh_oracle(pts)
            assert frame.lambda1 == pytest.approx(w[0], rel=1e-10)
            assert frame.lambda2 == pytest.approx(w[1], rel=1e-10)
            assert abs(abs(frame.axis1 @ v[:, 0]) - 1.0) < 1e-9
            assert abs(frame.axis1 @ frame.axis2) < 1e-12

    def test_translation_invariance(self, rng):
        pts = random_landmarks(rng)
        f0 = principal_frame(pts)
        f1 = principal_frame(pts + np.array([13.0, -4.5]))
        assert np.allclose(f1.center, f0.center + [13.0, -4.5], atol=1e-9)
        assert np.allclose(f1.axis1, f0.axis1, atol=1e-12)
        assert f1.lambda1 == pytest.approx(f0.lambda1, abs=1e-9)

    def test_axis_sign_points_up(self, rng):
        for _ in range(10):
            pts = random_landmarks(rng, angle=rng.uniform(0, 2 * np.pi))
            frame = principal_frame(pts)
            assert frame.axis1[1] <= 0.0

    def test_degenerate_cases(self):
        coincident = np.full((55, 2), 3.0)
        with pytest.raises(DegenerateLandmarksError):
            principal_frame(coincident)
        # Perfectly isotropic square of points: ambiguous orientation.
        square = repeat_to_55([(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)])
        # 55 = 4*13+3 leaves slight anisotropy; build exactly balanced points.
        circle = np.stack([np.cos(np.linspace(0, 2 * np.pi, 55, endpoint=False)),
                           np.sin(np.linspace(0, 2 * np.pi, 55, endpoint=False))], 1)
        with pytest.raises(DegenerateLandmarksError):
            principal_frame(circle)
        del square

    def test_oriented_bbox_center(self):
        # Axis-aligned cloud: center = mean of min/max per axis.
        pts = repeat_to_55([(0.0, 0.0), (4.0, 0.0), (0.0, 10.0), (4.0, 10.0),
                            (1.0, 2.0)])
        frame = principal_frame(pts)
        assert np.allclose(frame.center, [2.0, 5.0], atol=1e-9)


class TestUprightAlign:
    def test_already_upright_identity_rotation(self, rng):
        # Mirror symmetry in x zeroes the cross covariance: exactly upright.
        xs = rng.uniform(1.0, 5.0, size=27)
        ys = rng.uniform(-30.0, 30.0, size=27)
        pts = np.concatenate([
            np.column_stack([xs, ys]),
            np.column_stack([-xs, ys]),
            [[0.0, 31.0]],
        ]) + np.array([80.0, 80.0])
        frame = principal_frame(pts)
        assert abs(frame.angle) < 1e-6
        _, aligned, fwd = upright_align(np.zeros((160, 160)), pts)
        assert np.allclose(aligned, pts, atol=1e-9)

    def test_aligned_frame_is_vertical(self, rng):
        pts = random_landmarks(rng, spread=(30.0, 8.0), angle=np.radians(30))
        _, aligned, _ = upright_align(np.zeros((160, 160)), pts)
        frame = principal_frame(aligned)
        assert abs(frame.angle) < 1e-6

    def test_back_projection_round_trip(self, rng, ear_sample):
        img, lm = ear_sample
        _, aligned, fwd = upright_align(img, lm)
        back = fwd.inverse().apply(aligned)
        assert np.max(np.linalg.norm(back - lm, axis=1)) < 1e-6


class TestNormalizedError:
    def test_zero_for_exact(self, rng):
        pts = random_landmarks(rng)
        assert normalized_error(pts, pts, 100.0) == 0.0

    def test_uniform_offset_analytic(self, rng):
        pts = random_landmarks(rng)
        pred = pts + np.array([3.0, 4.0])
        assert normalized_error(pred, pts, 100.0) == pytest.approx(0.05, abs=1e-12)

    def test_matches_direct_summation_oracle(self, rng):
        truth = random_landmarks(rng)
        pred = truth + rng.normal(size=truth.shape)
        diag = bbox_diagonal(truth)
        expected = sum(
            float(np.hypot(*(p - t))) for p, t in zip(pred, truth)) / 55 / diag
        assert normalized_error(pred, truth, diag) == pytest.approx(expected, abs=1e-9)

    def test_scale_invariance(self, rng):
        truth = random_landmarks(rng)
        pred = truth + rng.normal(size=truth.shape)
        e1 = normalized_error(pred, truth, bbox_diagonal(truth))
        e2 = normalized_error(pred * 3.7, truth * 3.7, bbox_diagonal(truth * 3.7))
        assert e2 == pytest.approx(e1, rel=1e-9)

    def test_bad_diagonal(self, rng):
        pts = random_landmarks(rng)
        with pytest.raises(BadDiagonalError):
            normalized_error(pts, pts, 0.0)


class TestCedCurve:
    def test_counting_example(self):
        out = ced_curve([0.01, 0.05, 0.09], [0.05, 0.1])
        assert out[0] == (0.05, pytest.approx(2 / 3))
        assert out[1] == (0.1, pytest.approx(1.0))

    def test_all_above_max_threshold(self):
        out = ced_curve([0.5, 0.9], [0.1, 0.2])
        assert all(frac == 0.0 for _, frac in out)

    def test_matches_brute_force_count(self, rng):
        errors = rng.random(200).tolist()
        thresholds = np.sort(rng.random(10)).tolist()
        out = ced_curve(errors, thresholds)
        for th, frac in out:
            assert frac == sum(e <= th for e in errors) / len(errors)

    def test_monotone(self, rng):
        out = ced_curve(rng.random(100), np.linspace(0, 1, 20))
        fracs = [f for _, f in out]
        assert all(b >= a for a, b in zip(fracs, fracs[1:]))

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            ced_curve([], [0.1])


class TestLandmarkIO:
    def test_json_round_trip(self, tmp_path, rng):
        pts = random_landmarks(rng)
        path = tmp_path / "lm.json"
        save_landmarks(pts, path)
        assert np.allclose(load_landmarks(path), pts)

    def test_itwe_flat_text(self, tmp_path, rng):
        pts = random_landmarks(rng)
        path = tmp_path / "lm.txt"
        path.write_text(" ".join(str(v) for v in pts.ravel()))
        assert np.allclose(load_landmarks(path), pts)

    def test_wrong_count_rejected(self, tmp_path):
        path = tmp_path / "lm.json"
        path.write_text(json.dumps([[0.0, 1.0]] * 54))
        with pytest.raises(ValueError):
            load_landmarks(path)
