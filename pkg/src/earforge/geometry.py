"""Landmark-set geometry: PCA pose frames, upright alignment, error metrics.

A landmark set is an ordered (55, 2) array of (x, y) pixel coordinates
following the ITWE annotation indexing.  The pose frame of a set is the
eigenstructure of the 2x2 covariance of its points; the first axis is taken
as the up direction of the ear.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    BadDiagonalError,
    DegenerateLandmarksError,
    EmptyInputError,
)
from .image import AffineMap, affine_resample

#: Number of annotated ear landmarks.
N_LANDMARKS = 55

_EIG_EPS = 1e-12


def check_landmarks(points, n=N_LANDMARKS, name="landmarks"):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {pts.shape}")
    if n is not None and pts.shape[0] != n:
        raise ValueError(f"{name} must contain exactly {n} points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return pts


@dataclass(frozen=True)
class PoseFrame:
    """Center, orthonormal axes and eigenvalues of a landmark cloud.

    ``axis1`` is the dominant direction, sign-canonicalized to point toward
    the image top (y-component <= 0; ties broken toward positive x).
    ``axis2`` is ``axis1`` rotated by +90 degrees, so an upright ear has
    ``axis2`` pointing right.  ``lambda1 >= lambda2 >= 0`` are the population
    (1/N) covariance eigenvalues in squared pixels.
    """

    center: np.ndarray
    axis1: np.ndarray
    axis2: np.ndarray
    lambda1: float
    lambda2: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(2))
        object.__setattr__(self, "axis1", np.asarray(self.axis1, dtype=np.float64).reshape(2))
        object.__setattr__(self, "axis2", np.asarray(self.axis2, dtype=np.float64).reshape(2))

    @property
    def angle(self):
        """Rotation (radians) taking axis1 onto the image up direction (0, -1)."""
        return -math.pi / 2 - math.atan2(self.axis1[1], self.axis1[0])


def principal_frame(lm, n=N_LANDMARKS):
    """PCA pose frame of a landmark set.

    Eigenvalues use the population (1/N) covariance of the points; the center
    is the midpoint of the oriented bounding box (mean of min/max point
    projections along each axis).  Raises DegenerateLandmarksError when the
    cloud is (near) coincident or isotropic.
    """
    pts = check_landmarks(lm, n=n)
    mean = pts.mean(axis=0)
    d = pts - mean
    a = float(np.mean(d[:, 0] * d[:, 0]))
    b = float(np.mean(d[:, 0] * d[:, 1]))
    c = float(np.mean(d[:, 1] * d[:, 1]))
    if a + c <= _EIG_EPS:
        raise DegenerateLandmarksError("landmark covariance is (near) zero")

    # Closed-form eigendecomposition of [[a, b], [b, c]].
    half_gap = math.hypot(a - c, 2.0 * b) / 2.0
    mid = (a + c) / 2.0
    lam1 = mid + half_gap
    lam2 = max(mid - half_gap, 0.0)
    if lam1 - lam2 < _EIG_EPS:
        raise DegenerateLandmarksError("isotropic landmark cloud: orientation is ambiguous")

    if abs(b) > _EIG_EPS:
        v = np.array([b, lam1 - a])
    else:
        v = np.array([1.0, 0.0]) if a >= c else np.array([0.0, 1.0])
    v = v / np.linalg.norm(v)
    # Canonical sign: point toward the image top (y down in image coords).
    if v[1] > 0.0 or (v[1] == 0.0 and v[0] < 0.0):
        v = -v
    axis1 = v
    axis2 = np.array([-v[1], v[0]])

    t1 = pts @ axis1
    t2 = pts @ axis2
    mid1 = (t1.min() + t1.max()) / 2.0
    mid2 = (t2.min() + t2.max()) / 2.0
    center = mid1 * axis1 + mid2 * axis2
    return PoseFrame(center=center, axis1=axis1, axis2=axis2,
                     lambda1=float(lam1), lambda2=float(lam2))


def upright_align(img, lm):
    """Rotate image and landmarks so the dominant axis points up.

    The rotation is about the pose-frame center, which stays fixed; the
    output image keeps the input size.  Returns ``(aligned_img, aligned_lm,
    fwd)`` where ``fwd`` maps source coordinates to aligned coordinates
    (its inverse back-projects aligned points).
    """
    pts = check_landmarks(lm)
    frame = principal_frame(pts)
    fwd = AffineMap.rotation(frame.angle, center=frame.center)
    aligned_lm = fwd.apply(pts)
    arr = np.asarray(img, dtype=np.float64)
    aligned_img = affine_resample(arr, fwd.inverse(), arr.shape[1], arr.shape[0])
    return aligned_img, aligned_lm, fwd


def bbox_diagonal(lm, n=N_LANDMARKS):
    """Diagonal length of the axis-aligned bounding box of a landmark set."""
    pts = check_landmarks(lm, n=n)
    spans = pts.max(axis=0) - pts.min(axis=0)
    return float(math.hypot(spans[0], spans[1]))


def normalized_error(pred, truth, truth_bbox_diagonal):
    """Mean point-to-point distance divided by the ground-truth bbox diagonal."""
    if truth_bbox_diagonal <= 0:
        raise BadDiagonalError(f"bbox diagonal must be > 0, got {truth_bbox_diagonal}")
    p = check_landmarks(pred)
    t = check_landmarks(truth)
    dists = np.linalg.norm(p - t, axis=1)
    return float(dists.mean() / truth_bbox_diagonal)


def ced_curve(errors, thresholds):
    """Cumulative error distribution: fraction of errors <= each threshold."""
    errs = np.asarray(errors, dtype=np.float64)
    if errs.size == 0:
        raise EmptyInputError("ced_curve needs at least one error value")
    out = []
    for th in thresholds:
        out.append((float(th), float(np.mean(errs <= th))))
    return out


# --- landmark file I/O -------------------------------------------------------

def load_landmarks(path):
    """Read landmarks from JSON ([[x, y] * 55]) or ITWE flat text (110 numbers)."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        values = [float(tok) for tok in text.split()]
        if len(values) != 2 * N_LANDMARKS:
            raise ValueError(
                f"{path}: expected {2 * N_LANDMARKS} numbers, got {len(values)}")
        return np.asarray(values, dtype=np.float64).reshape(N_LANDMARKS, 2)
    return check_landmarks(np.asarray(data, dtype=np.float64), name=str(path))


def save_landmarks(lm, path):
    pts = check_landmarks(lm)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([[float(x), float(y)] for x, y in pts], fh)
        fh.write("\n")
