"""Grayscale image carrier and resampling kernels.

Images are plain 2-D numpy arrays of shape (height, width) holding
intensities in [0, 1].  Points and coordinates are (x, y) pairs with x along
columns and y along rows, so ``img[y, x]`` is the pixel at point (x, y).
All functions are pure; arrays are never modified in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as _PILImage

from .exceptions import BadFactorError, SingularMapError

#: Rec. 601 luma weights used to collapse color inputs to grayscale.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_DET_EPS = 1e-12


def check_image(img, name="img"):
    """Validate and return a grayscale image array.

    Accepts anything array-like; enforces 2-D, finite values in [0, 1] and
    at least one pixel per side.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (height, width), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have width, height >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite intensities")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} intensities must lie in [0, 1]")
    return arr


@dataclass(frozen=True)
class AffineMap:
    """2-D affine transform ``p -> matrix @ p + translation``.

    Resampling uses pull semantics: the map sends *output* pixel coordinates
    to *source* coordinates.  Applying the same map to points therefore
    converts output-frame point coordinates into source-frame ones.
    """

    matrix: np.ndarray      # (2, 2)
    translation: np.ndarray  # (2,)

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=np.float64).reshape(2, 2))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(2))

    @staticmethod
    def identity():
        return AffineMap(np.eye(2), np.zeros(2))

    @staticmethod
    def rotation(angle_rad, center=(0.0, 0.0)):
        """Rotation by ``angle_rad`` about ``center`` (positive = x toward y axis)."""
        c, s = np.cos(angle_rad), np.sin(angle_rad)
        mat = np.array([[c, -s], [s, c]])
        center = np.asarray(center, dtype=np.float64)
        return AffineMap(mat, center - mat @ center)

    @property
    def det(self):
        m = self.matrix
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]

    def is_singular(self):
        return abs(self.det) <= _DET_EPS

    def apply(self, points):
        """Map points of shape (2,) or (n, 2)."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + self.translation

    def compose(self, other):
        """Return the map equivalent to ``self`` applied after ``other``."""
        return AffineMap(self.matrix @ other.matrix,
                         self.matrix @ other.translation + self.translation)

    def inverse(self):
        if self.is_singular():
            raise SingularMapError(f"cannot invert map with |det| = {abs(self.det):.3e}")
        inv = np.linalg.inv(self.matrix)
        return AffineMap(inv, -inv @ self.translation)


def bilinear_sample(img, x, y):
    """Bilinearly interpolated intensity at (x, y); 0.0 outside the pixel grid.

    Coordinates outside [0, w-1] x [0, h-1] return the fill value 0.0.
    Scalar and array coordinates are both accepted.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    scalar = xs.ndim == 0 and ys.ndim == 0
    xs, ys = np.atleast_1d(xs), np.atleast_1d(ys)

    inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    xc = np.clip(xs, 0, w - 1)
    yc = np.clip(ys, 0, h - 1)
    x0 = np.floor(xc).astype(np.intp)
    y0 = np.floor(yc).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0

    v00 = arr[y0, x0]
    v01 = arr[y0, x1]
    v10 = arr[y1, x0]
    v11 = arr[y1, x1]
    # Difference form keeps constant regions bit-exact under interpolation.
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    out = top + fy * (bot - top)
    out = np.where(inside, out, 0.0)
    return float(out[0]) if scalar else out.reshape(np.shape(x) if np.ndim(x) else np.shape(y))


def affine_resample(img, amap: AffineMap, out_w, out_h):
    """Resample ``img`` through an output->source affine map.

    Output pixel (u, v) takes the bilinear sample of ``img`` at ``amap((u, v))``.
    """
    if amap.is_singular():
        raise SingularMapError(f"resampling map has |det| = {abs(amap.det):.3e}")
    arr = np.asarray(img, dtype=np.float64)
    us, vs = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    m, t = amap.matrix, amap.translation
    sx = m[0, 0] * us + m[0, 1] * vs + t[0]
    sy = m[1, 0] * us + m[1, 1] * vs + t[1]
    return bilinear_sample(arr, sx, sy)


def flip_horizontal(img):
    """Reverse column order."""
    return np.asarray(img, dtype=np.float64)[:, ::-1].copy()


def adjust_contrast(img, factor):
    """Scale deviations from the image mean by ``factor``, clamped to [0, 1].

    ``factor`` must lie in [0.5, 1.5] (up to a 50% range change either way).
    """
    if not 0.5 <= factor <= 1.5:
        raise BadFactorError(f"contrast factor {factor} outside [0.5, 1.5]")
    arr = np.asarray(img, dtype=np.float64)
    mean = arr.mean()
    return np.clip(mean + factor * (arr - mean), 0.0, 1.0)


# --- file I/O ---------------------------------------------------------------

def load_image(path):
    """Load an 8-bit grayscale PGM (binary P5) or a PNG into a [0, 1] array.

    Color PNGs are converted with Rec. 601 luma weights.
    """
    path = str(path)
    if path.lower().endswith(".pgm"):
        return _load_pgm(path)
    return _load_png(path)


def save_image(img, path):
    """Write a [0, 1] image as 8-bit PGM or PNG depending on the extension."""
    arr = check_image(img)
    data = np.round(arr * 255.0).astype(np.uint8)
    path = str(path)
    if path.lower().endswith(".pgm"):
        with open(path, "wb") as fh:
            fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii"))
            fh.write(data.tobytes())
    else:
        _PILImage.fromarray(data, mode="L").save(path)


def _load_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary (P5) PGM file")
    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    data = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    return data.reshape(height, width).astype(np.float64) / 255.0


def _load_png(path):
    with _PILImage.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        else:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
            r, g, b = LUMA_WEIGHTS
            arr = r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]
    return np.clip(arr / 255.0, 0.0, 1.0)
