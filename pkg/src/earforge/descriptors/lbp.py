"""Uniform local binary patterns over a fixed cell grid."""

from __future__ import annotations

import numpy as np

from .base import LbpParams, check_input
from .common import cell_histograms, l1_normalize_cells, lbp_codes, uniform_lbp_table

_TABLE_CACHE = {}


def _table(neighbors):
    if neighbors not in _TABLE_CACHE:
        _TABLE_CACHE[neighbors] = uniform_lbp_table(neighbors)
    return _TABLE_CACHE[neighbors]


def lbp_bins(params: LbpParams):
    if params.uniform:
        return _table(params.neighbors)[1]
    return 1 << params.neighbors


def extract_lbp(img, params: LbpParams = None):
    params = params or LbpParams()
    arr = check_input(img)
    codes, margin = lbp_codes(arr, params.radius, params.neighbors)
    if params.uniform:
        table, n_bins = _table(params.neighbors)
        codes = table[codes]
    else:
        n_bins = 1 << params.neighbors
    hist = cell_histograms(codes, n_bins, margin, params.cell_size)
    return l1_normalize_cells(hist).reshape(-1)


def lbp_length(params: LbpParams = None, image_size=128):
    params = params or LbpParams()
    n_cells = image_size // params.cell_size
    return n_cells * n_cells * lbp_bins(params)
