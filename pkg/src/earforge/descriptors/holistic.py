"""Holistic PCA descriptor: drop leading components, whiten the kept band.

The first ``drop_count`` eigenvectors absorb illumination/background
variation and are discarded; of the remainder, ``keep_fraction`` are kept and
their coefficients divided by sqrt(eigenvalue), so plain Euclidean distance
on the output realizes the Mahalanobis-style metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import SizeMismatchError, TooFewSamplesError
from .base import Descriptor, METRIC_WHITENED_EUCLIDEAN

_RANK_EPS = 1e-12


@dataclass
class PcaModel:
    mean: np.ndarray          # (d,)
    components: np.ndarray    # (k_total, d), rows orthonormal, eigenvalue-descending
    eigenvalues: np.ndarray   # (k_total,)
    drop_count: int = 20
    keep_fraction: float = 0.6

    @property
    def kept_range(self):
        """Slice of retained components after the drop; raises if empty."""
        total = len(self.eigenvalues)
        remaining = total - self.drop_count
        if remaining < 1:
            raise TooFewSamplesError(
                f"model has {total} components; dropping {self.drop_count} "
                "leaves none")
        k = int(np.rint(self.keep_fraction * remaining))
        k = max(k, 1)
        return slice(self.drop_count, self.drop_count + k)


def pca_fit(images, drop_count=20, keep_fraction=0.6):
    """Eigendecompose the sample covariance of vectorized images.

    Uses the snapshot (Gram-matrix) route when samples are fewer than pixels;
    keeps every numerically nonzero component, eigenvalue-descending, with
    deterministic sign (largest-magnitude entry positive).
    """
    stack = np.stack([np.asarray(im, dtype=np.float64).ravel() for im in images])
    n, d = stack.shape
    if n < 2:
        raise TooFewSamplesError(f"PCA needs >= 2 images, got {n}")
    mean = stack.mean(axis=0)
    x = stack - mean
    if n <= d:
        gram = x @ x.T / (n - 1)
        w, u = np.linalg.eigh(gram)
        order = np.argsort(w)[::-1]
        w = w[order]
        u = u[:, order]
        keep = w > max(w[0], 0.0) * _RANK_EPS
        w = w[keep]
        u = u[:, keep]
        comps = (x.T @ u) / np.sqrt(w * (n - 1))
        comps = comps.T
    else:
        cov = x.T @ x / (n - 1)
        w, v = np.linalg.eigh(cov)
        order = np.argsort(w)[::-1]
        w = w[order]
        v = v[:, order]
        keep = w > max(w[0], 0.0) * _RANK_EPS
        w = w[keep]
        comps = v[:, keep].T
    # Deterministic sign: largest-|entry| coordinate made positive.
    for row in comps:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=comps, eigenvalues=w,
                    drop_count=drop_count, keep_fraction=keep_fraction)


def pca_project(model: PcaModel, img):
    """Whitened coefficients of an image on the model's retained band."""
    vec = np.asarray(img, dtype=np.float64).ravel()
    if vec.shape[0] != model.mean.shape[0]:
        raise SizeMismatchError(
            f"image has {vec.shape[0]} pixels, model expects {model.mean.shape[0]}")
    band = model.kept_range
    coeffs = model.components[band] @ (vec - model.mean)
    whitened = coeffs / np.sqrt(model.eigenvalues[band])
    return Descriptor(values=whitened, metric=METRIC_WHITENED_EUCLIDEAN, kind="pca")
