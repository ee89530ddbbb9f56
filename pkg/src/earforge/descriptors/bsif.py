"""Binarized statistical image features backed by a loadable filter bank."""

from __future__ import annotations

import os

import numpy as np

from ..exceptions import MissingFilterBankError
from .base import BsifParams, check_input
from .common import cell_histograms, l1_normalize_cells

_BANK_CACHE = {}


def make_random_bsif_filters(seed=0, size=11, count=8):
    """Deterministic zero-mean, orthonormal stand-in filter bank.

    Shape (size, size, count); rows of the flattened bank are orthonormal and
    have zero DC response, like learned banks do.
    """
    rng = np.random.default_rng(seed)
    flat = rng.standard_normal((count, size * size))
    flat -= flat.mean(axis=1, keepdims=True)
    q, _ = np.linalg.qr(flat.T)  # (size^2, count), orthonormal columns
    bank = q.T.reshape(count, size, size)
    return np.moveaxis(bank, 0, -1)


def load_filter_bank(params: BsifParams):
    """Resolve the filter bank: asset file first, seeded fallback if allowed."""
    key = (params.filter_path, params.filter_size, params.n_filters,
           params.allow_random, params.random_seed)
    if key in _BANK_CACHE:
        return _BANK_CACHE[key]
    if params.filter_path and os.path.exists(params.filter_path):
        from ..nn.weights import load_weights

        tensors = load_weights(params.filter_path)
        if "bsif" not in tensors:
            raise MissingFilterBankError(
                f"{params.filter_path}: container has no 'bsif' tensor")
        bank = np.asarray(tensors["bsif"], dtype=np.float64)
        expected = (params.filter_size, params.filter_size, params.n_filters)
        if bank.shape != expected:
            raise MissingFilterBankError(
                f"bsif tensor shape {bank.shape} != expected {expected}")
    elif params.allow_random:
        bank = make_random_bsif_filters(params.random_seed, params.filter_size,
                                        params.n_filters)
    else:
        raise MissingFilterBankError(
            "no BSIF filter asset found; pass filter_path or allow_random "
            "(--allow-random-bsif)")
    _BANK_CACHE[key] = bank
    return bank


def extract_bsif(img, params: BsifParams = None):
    params = params or BsifParams()
    arr = check_input(img)
    bank = load_filter_bank(params)
    size = params.filter_size
    margin = size // 2
    windows = np.lib.stride_tricks.sliding_window_view(arr, (size, size))
    responses = np.tensordot(windows, bank, axes=([2, 3], [0, 1]))
    bits = responses > 0
    codes = np.zeros(responses.shape[:2], dtype=np.intp)
    for k in range(params.n_filters):
        codes |= bits[:, :, k].astype(np.intp) << k
    n_bins = 1 << params.n_filters
    hist = cell_histograms(codes, n_bins, margin, params.cell_size)
    return l1_normalize_cells(hist).reshape(-1)


def bsif_length(params: BsifParams = None, image_size=128):
    params = params or BsifParams()
    n_cells = image_size // params.cell_size
    return n_cells * n_cells * (1 << params.n_filters)
