"""Dense SIFT: upright 128-d descriptors on a fixed grid, L1-normalized."""

from __future__ import annotations

import numpy as np

from .base import DsiftParams, check_input
from .common import image_gradients


def dsift_centers(params: DsiftParams, image_size=128):
    """Keypoint centers whose full support patch fits inside the image."""
    half = params.spatial_bins * params.bin_size // 2
    return np.arange(half, image_size - half + 1, params.step)


def _descriptor_at(mag, ori_coord, weights, cx, cy, params: DsiftParams):
    half = params.spatial_bins * params.bin_size // 2
    sl = np.s_[cy - half : cy + half, cx - half : cx + half]
    m = (mag[sl] * weights).ravel()
    o = ori_coord[sl].ravel()

    size = 2 * half
    ys, xs = np.indices((size, size), dtype=np.float64)
    # Spatial bin coordinates: patch spans bins [-0.5, spatial_bins - 0.5).
    u = (xs.ravel() + 0.5) / params.bin_size - 0.5
    v = (ys.ravel() + 0.5) / params.bin_size - 0.5

    nb = params.orientation_bins
    sb = params.spatial_bins
    desc = np.zeros(sb * sb * nb)
    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    o0 = np.floor(o).astype(np.intp)
    fu, fv, fo = u - u0, v - v0, o - o0
    for du, wu in ((0, 1.0 - fu), (1, fu)):
        ub = u0 + du
        oku = (ub >= 0) & (ub < sb)
        for dv, wv in ((0, 1.0 - fv), (1, fv)):
            vb = v0 + dv
            okv = oku & (vb >= 0) & (vb < sb)
            for do, wo in ((0, 1.0 - fo), (1, fo)):
                ob = np.mod(o0 + do, nb)
                w = m * wu * wv * wo
                idx = (vb * sb + ub) * nb + ob
                np.add.at(desc, idx[okv], w[okv])
    total = desc.sum()
    if total > 0:
        desc /= total
    return desc


def extract_dsift(img, params: DsiftParams = None):
    params = params or DsiftParams()
    arr = check_input(img)
    gx, gy = image_gradients(arr)
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)
    ori_coord = ori / (2.0 * np.pi) * params.orientation_bins

    half = params.spatial_bins * params.bin_size // 2
    ys, xs = np.indices((2 * half, 2 * half), dtype=np.float64)
    sigma = half
    weights = np.exp(-(((xs - half + 0.5) ** 2) + ((ys - half + 0.5) ** 2))
                     / (2.0 * sigma * sigma))

    centers = dsift_centers(params, arr.shape[0])
    descs = [
        _descriptor_at(mag, ori_coord, weights, cx, cy, params)
        for cy in centers
        for cx in centers
    ]
    return np.concatenate(descs)


def dsift_length(params: DsiftParams = None, image_size=128):
    params = params or DsiftParams()
    n = len(dsift_centers(params, image_size))
    return n * n * params.spatial_bins ** 2 * params.orientation_bins
