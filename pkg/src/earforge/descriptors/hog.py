"""Histogram of oriented gradients with L2-hys block normalization."""

from __future__ import annotations

import numpy as np

from .base import HogParams, check_input
from .common import image_gradients

_EPS = 1e-10


def _cell_histograms(img, params: HogParams):
    gx, gy = image_gradients(img)
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), np.pi)
    nb = params.orientations
    coord = ori / np.pi * nb - 0.5
    lo = np.floor(coord)
    frac = coord - lo
    lo_bin = np.mod(lo.astype(np.intp), nb)
    hi_bin = np.mod(lo_bin + 1, nb)

    n_cells = img.shape[0] // params.cell_size
    ys, xs = np.indices(img.shape)
    cell = (ys // params.cell_size) * n_cells + (xs // params.cell_size)
    size = n_cells * n_cells * nb
    hist = np.bincount((cell * nb + lo_bin).ravel(),
                       weights=(mag * (1.0 - frac)).ravel(), minlength=size)
    hist += np.bincount((cell * nb + hi_bin).ravel(),
                        weights=(mag * frac).ravel(), minlength=size)
    return hist.reshape(n_cells, n_cells, nb)


def extract_hog(img, params: HogParams = None):
    """Blocks of 2x2 cells, stride one cell, L2-hys clipped at 0.2.

    A gradient-free image yields the all-zero descriptor (the normalization
    guard never divides by a vanishing norm).
    """
    params = params or HogParams()
    arr = check_input(img)
    cells = _cell_histograms(arr, params)
    n_cells = cells.shape[0]
    bc = params.block_cells
    n_blocks = n_cells - bc + 1
    out = np.zeros((n_blocks, n_blocks, bc * bc * params.orientations))
    for by in range(n_blocks):
        for bx in range(n_blocks):
            v = cells[by : by + bc, bx : bx + bc].reshape(-1)
            v = v / np.sqrt(np.sum(v * v) + _EPS * _EPS)
            v = np.minimum(v, params.clip)
            norm = np.sqrt(np.sum(v * v))
            if norm > _EPS:
                v = v / norm
            out[by, bx] = v
    return out.reshape(-1)


def hog_length(params: HogParams = None, image_size=128):
    params = params or HogParams()
    n_cells = image_size // params.cell_size
    n_blocks = n_cells - params.block_cells + 1
    return n_blocks * n_blocks * params.block_cells ** 2 * params.orientations
