"""Geometric ear normalization and detector-input cropping.

The canonical recognition image is 128x128: the ear center lands on output
pixel (64, 64), the dominant landmark axis is vertical, and the sampling rate
differs per axis so that 2*sqrt(lambda1) source pixels cover the 64 px from
center to the top edge while 2*sqrt(lambda2) cover the 64 px from center to a
side.  Pose-induced width changes are mostly cancelled by the anisotropy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import BadPctError, BadWindowError, ZeroWidthError
from .geometry import PoseFrame, check_landmarks, principal_frame
from .image import AffineMap, affine_resample

#: Side length of the canonical recognition image.
NORMALIZED_SIZE = 128
#: Side length of the landmark-detector input crop.
DETECTOR_SIZE = 96

_LAMBDA_EPS = 1e-12


@dataclass(frozen=True)
class CropWindow:
    """Axis-aligned square source region described by center and side length."""

    center: tuple
    size: float

    def __post_init__(self):
        if self.size <= 0:
            raise BadWindowError(f"crop window size must be > 0, got {self.size}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "size", float(self.size))


def geometric_normal_map(frame: PoseFrame, out_size=NORMALIZED_SIZE):
    """Pull map (output -> source) realizing the anisotropic normalization.

    Output up maps onto ``frame.axis1`` and output right onto ``frame.axis2``;
    the frame center lands on output pixel (out_size/2, out_size/2).
    """
    if frame.lambda2 <= _LAMBDA_EPS:
        raise ZeroWidthError("second eigenvalue (near) zero: ear has no width")
    half = out_size / 2.0
    s1 = 2.0 * math.sqrt(frame.lambda1) / half  # source px per output px, vertical
    s2 = 2.0 * math.sqrt(frame.lambda2) / half  # source px per output px, horizontal
    # Columns: d(source)/du along axis2, d(source)/dv along -axis1.
    matrix = np.column_stack([s2 * frame.axis2, -s1 * frame.axis1])
    translation = frame.center - matrix @ np.array([half, half])
    return AffineMap(matrix, translation)


def normalize_geometric(img, lm, out_size=NORMALIZED_SIZE, return_map=False):
    """Resample an ear to the canonical frame using its landmark pose.

    A single bilinear pass applies rotation, anisotropic scale and translation
    together.  With ``return_map=True`` also returns the pull map used, whose
    inverse carries source landmarks into the normalized frame.
    """
    frame = principal_frame(check_landmarks(lm))
    amap = geometric_normal_map(frame, out_size=out_size)
    out = affine_resample(np.asarray(img, dtype=np.float64), amap, out_size, out_size)
    return (out, amap) if return_map else out


def crop_window_map(win: CropWindow, out_size):
    """Pull map for resampling a square window to ``out_size`` pixels."""
    scale = win.size / out_size
    half = (out_size - 1) / 2.0
    matrix = np.array([[scale, 0.0], [0.0, scale]])
    translation = np.array([win.center[0] - half * scale,
                            win.center[1] - half * scale])
    return AffineMap(matrix, translation)


def crop_detector_input(img, win: CropWindow, out_size=DETECTOR_SIZE, return_map=False):
    """Resample a square window to the detector input size with 0-fill outside."""
    if win.size <= 0:
        raise BadWindowError(f"crop window size must be > 0, got {win.size}")
    amap = crop_window_map(win, out_size)
    out = affine_resample(np.asarray(img, dtype=np.float64), amap, out_size, out_size)
    return (out, amap) if return_map else out


def jitter_window(win: CropWindow, pct, rng_seed):
    """Perturb a crop window like an imperfect ear detector would.

    Center moves uniformly within +-pct*size per axis and the size is scaled
    by a uniform factor in [1-pct, 1+pct].  Deterministic given the seed.
    """
    if not 0.0 <= pct <= 1.0:
        raise BadPctError(f"jitter pct must lie in [0, 1], got {pct}")
    rng = np.random.default_rng(rng_seed)
    dx = rng.uniform(-pct, pct) * win.size
    dy = rng.uniform(-pct, pct) * win.size
    factor = rng.uniform(1.0 - pct, 1.0 + pct)
    return CropWindow(center=(win.center[0] + dx, win.center[1] + dy),
                      size=win.size * max(factor, 1e-9))


def landmark_crop_window(lm, margin=1.0):
    """Ground-truth style crop window: bbox center, side = max extent * margin."""
    pts = check_landmarks(lm)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    size = float(max(hi[0] - lo[0], hi[1] - lo[1])) * margin
    center = ((lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0)
    return CropWindow(center=center, size=size)
