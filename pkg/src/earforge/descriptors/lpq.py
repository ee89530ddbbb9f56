"""Local phase quantization: 8-bit codes from four STFT frequency signs."""

from __future__ import annotations

import numpy as np

from .base import LpqParams, RilpqParams, check_input
from .common import cell_histograms, image_gradients, l1_normalize_cells
from ..image import AffineMap, affine_resample

N_LPQ_BINS = 256


def _stft_kernels(window):
    """Four separable frequency kernels at a = 1/window: (a,0), (0,a), (a,a), (a,-a)."""
    m = window // 2
    t = np.arange(-m, m + 1, dtype=np.float64)
    a = 1.0 / window
    wave = np.exp(-2j * np.pi * a * t)
    ones = np.ones(window, dtype=np.complex128)
    return [
        (wave, ones),
        (ones, wave),
        (wave, wave),
        (wave, np.conj(wave)),
    ]


def _corr1d_valid(arr, kernel, axis):
    win = np.lib.stride_tricks.sliding_window_view(arr, len(kernel), axis=axis)
    return win @ kernel


def lpq_codes(img, window=5):
    """Phase-sign codes over the valid region; returns (codes, margin)."""
    arr = np.asarray(img, dtype=np.complex128)
    codes = None
    for i, (kx, ky) in enumerate(_stft_kernels(window)):
        resp = _corr1d_valid(_corr1d_valid(arr, kx, axis=1), ky, axis=0)
        bits = ((resp.real >= 0).astype(np.intp) << (2 * i)) | \
               ((resp.imag >= 0).astype(np.intp) << (2 * i + 1))
        codes = bits if codes is None else codes | bits
    return codes, window // 2


def extract_lpq(img, params: LpqParams = None):
    params = params or LpqParams()
    arr = check_input(img)
    codes, margin = lpq_codes(arr, params.window)
    hist = cell_histograms(codes, N_LPQ_BINS, margin, params.cell_size)
    return l1_normalize_cells(hist).reshape(-1)


def lpq_length(params: LpqParams = None, image_size=128):
    params = params or LpqParams()
    n_cells = image_size // params.cell_size
    return n_cells * n_cells * N_LPQ_BINS


# --- rotation-invariant variant ----------------------------------------------

def _characteristic_orientation(gx, gy, mask):
    """Dominant gradient direction of a neighborhood.

    The axis comes from the double-angle (structure-tensor) moment, which is
    stable on oriented texture; the 180-degree ambiguity is resolved by the
    sign of the magnitude-squared gradient component along that axis.
    """
    g = gx[mask] + 1j * gy[mask]
    m2 = np.abs(g) ** 2
    axis_moment = np.sum(m2 * np.exp(2j * np.angle(g)))
    axis = 0.5 * np.angle(axis_moment)
    sign = np.sum(m2 * np.cos(np.angle(g) - axis))
    if sign < 0:
        axis += np.pi
    return float(axis)


def extract_rilpq(img, params: RilpqParams = None):
    """LPQ with per-cell pre-rotation by the local characteristic orientation.

    Each cell is resampled from a patch rotated so its dominant gradient
    direction is canonical, then coded like plain LPQ; one code per cell
    pixel survives the window margin by construction.
    """
    params = params or RilpqParams()
    arr = check_input(img)
    gx, gy = image_gradients(arr)
    cell = params.cell_size
    margin = params.window // 2
    patch = cell + 2 * margin
    n_cells = arr.shape[0] // cell
    half = (patch - 1) / 2.0

    ys, xs = np.indices(arr.shape)
    hists = np.zeros((n_cells, n_cells, N_LPQ_BINS))
    for cy in range(n_cells):
        for cx in range(n_cells):
            center = np.array([cx * cell + (cell - 1) / 2.0,
                               cy * cell + (cell - 1) / 2.0])
            # Orientation from a neighborhood slightly wider than the cell.
            rad = cell
            mask = (np.abs(xs - center[0]) <= rad) & (np.abs(ys - center[1]) <= rad)
            theta = _characteristic_orientation(gx, gy, mask)
            rot = AffineMap.rotation(theta, center=center)
            shift = AffineMap(np.eye(2), center - half)
            pull = rot.compose(shift)
            rotated = affine_resample(arr, pull, patch, patch)
            codes, _ = lpq_codes(rotated, params.window)
            hists[cy, cx] = np.bincount(codes.ravel(), minlength=N_LPQ_BINS)
    return l1_normalize_cells(hists).reshape(-1)


def rilpq_length(params: RilpqParams = None, image_size=128):
    params = params or RilpqParams()
    n_cells = image_size // params.cell_size
    return n_cells * n_cells * N_LPQ_BINS
