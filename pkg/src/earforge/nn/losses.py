"""Training losses: mean squared error, softmax cross-entropy, center loss.

All losses return the scalar loss together with the gradient with respect to
their first argument so the training loop can chain into Network.backward.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import BadLabelError, ShapeMismatchError, UnknownClassError


def loss_mse(pred, target):
    """Mean over batch and components of the squared difference."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"mse shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    grad = (2.0 / diff.size) * diff
    return loss, grad


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_softmax(logits, labels):
    """Mean cross-entropy with log-sum-exp stabilization."""
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.intp)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatchError(
            f"need (n, classes) logits and (n,) labels, got {logits.shape}/{labels.shape}")
    n, c = logits.shape
    if labels.min() < 0 or labels.max() >= c:
        raise BadLabelError(f"labels must lie in [0, {c}), got range "
                            f"[{labels.min()}, {labels.max()}]")
    z = logits.astype(np.float64) - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), labels]))
    grad = _softmax(logits.astype(np.float64))
    grad[np.arange(n), labels] -= 1.0
    grad = (grad / n).astype(logits.dtype)
    return loss, grad


def loss_center(features, labels, centers, weight, update_rate=0.5):
    """Center loss: weight * 0.5 * mean ||f - c_label||^2.

    Returns ``(loss, feature_grad, new_centers)``: the loss and gradient use
    the incoming centers, and ``new_centers`` applies the per-class batch
    update rule ``c -= update_rate * sum(c - f_i) / (1 + n_class)``.
    """
    features = np.asarray(features)
    labels = np.asarray(labels, dtype=np.intp)
    centers = np.asarray(centers)
    if features.ndim != 2 or centers.ndim != 2 or features.shape[1] != centers.shape[1]:
        raise ShapeMismatchError(
            f"feature width {features.shape} must match centers {centers.shape}")
    if labels.min() < 0 or labels.max() >= centers.shape[0]:
        raise UnknownClassError(
            f"label outside [0, {centers.shape[0]}): {labels.min()}..{labels.max()}")
    n = features.shape[0]
    diff = features.astype(np.float64) - centers[labels].astype(np.float64)
    loss = float(weight * 0.5 * np.mean(np.sum(diff * diff, axis=1)))
    grad = (weight * diff / n).astype(features.dtype)

    new_centers = centers.astype(np.float64).copy()
    for cls in np.unique(labels):
        idx = labels == cls
        delta = np.sum(new_centers[cls] - features[idx].astype(np.float64), axis=0)
        new_centers[cls] -= update_rate * delta / (1.0 + idx.sum())
    return loss, grad, new_centers.astype(centers.dtype)
