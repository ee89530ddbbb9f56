"""Patterns of oriented edge magnitudes.

Gradient magnitudes are split into unsigned orientation channels, each
channel is box-accumulated, and uniform LBP codes of every accumulated map
are histogrammed per cell.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .base import PoemParams, check_input
from .common import (
    cell_histograms,
    image_gradients,
    l1_normalize_cells,
    lbp_codes,
    uniform_lbp_table,
)


def extract_poem(img, params: PoemParams = None):
    params = params or PoemParams()
    arr = check_input(img)
    gx, gy = image_gradients(arr)
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.minimum((ori / np.pi * params.orientations).astype(np.intp),
                      params.orientations - 1)
    table, n_bins = uniform_lbp_table(8)

    per_map = []
    for b in range(params.orientations):
        channel = np.where(bins == b, mag, 0.0)
        accum = ndimage.uniform_filter(channel, size=params.accum_size,
                                       mode="constant")
        codes, margin = lbp_codes(accum, params.lbp_radius, 8)
        hist = cell_histograms(table[codes], n_bins, margin, params.cell_size)
        per_map.append(l1_normalize_cells(hist))
    # Concatenate as (cell_y, cell_x, orientation, bins) in scan order.
    stacked = np.stack(per_map, axis=2)
    return stacked.reshape(-1)


def poem_length(params: PoemParams = None, image_size=128):
    params = params or PoemParams()
    n_cells = image_size // params.cell_size
    _, n_bins = uniform_lbp_table(8)
    return n_cells * n_cells * params.orientations * n_bins
