"""Gabor wavelet magnitudes, mean-pooled, matched with the cosine distance."""

from __future__ import annotations

import numpy as np

from .base import GaborParams, check_input
from .common import INPUT_SIZE

_BANK_CACHE = {}


def gabor_kernel(k_mag, phi, sigma, size):
    """Complex Gabor wavelet on a centered grid (DC-compensated)."""
    half = size // 2
    coords = np.arange(size) - half
    xs, ys = np.meshgrid(coords, coords)
    kx = k_mag * np.cos(phi)
    ky = k_mag * np.sin(phi)
    r2 = xs * xs + ys * ys
    envelope = (k_mag * k_mag / (sigma * sigma)) * np.exp(
        -k_mag * k_mag * r2 / (2.0 * sigma * sigma))
    wave = np.exp(1j * (kx * xs + ky * ys)) - np.exp(-sigma * sigma / 2.0)
    return envelope * wave


def _filter_bank_fft(params: GaborParams, size):
    key = (params, size)
    if key in _BANK_CACHE:
        return _BANK_CACHE[key]
    ffts = []
    for v in range(params.scales):
        k_mag = params.kmax / params.freq_ratio ** v
        for u in range(params.orientations):
            phi = np.pi * u / params.orientations
            kernel = gabor_kernel(k_mag, phi, params.sigma, size)
            ffts.append(np.fft.fft2(np.fft.ifftshift(kernel)))
    _BANK_CACHE[key] = ffts
    return ffts


def extract_gabor(img, params: GaborParams = None):
    """Concatenated mean-pooled magnitude responses (circular convolution)."""
    params = params or GaborParams()
    arr = check_input(img)
    size = arr.shape[0]
    img_fft = np.fft.fft2(arr)
    p = params.pool
    pooled_size = size // p
    out = np.empty(params.scales * params.orientations * pooled_size * pooled_size)
    for i, kern_fft in enumerate(_filter_bank_fft(params, size)):
        response = np.abs(np.fft.ifft2(img_fft * kern_fft))
        pooled = response.reshape(pooled_size, p, pooled_size, p).mean(axis=(1, 3))
        out[i * pooled.size : (i + 1) * pooled.size] = pooled.ravel()
    return out


def gabor_length(params: GaborParams = None, image_size=INPUT_SIZE):
    params = params or GaborParams()
    pooled = image_size // params.pool
    return params.scales * params.orientations * pooled * pooled
