"""Distances, all-vs-all score matrices, min-max normalization, fusion.

Scores are distances end to end (lower = more similar); CMC and ROC consume
ascending order.  Self-pairs (identical image ids on both axes) are tracked
and become NaN after normalization so they can never leak into fusion or
evaluation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .descriptors.base import (
    METRIC_CHI_SQUARE,
    METRIC_COSINE,
    METRIC_WHITENED_EUCLIDEAN,
)
from .exceptions import (
    IdMismatchError,
    LengthMismatchError,
    MetricMismatchError,
    NotNormalizedError,
    TooFewGalleryError,
)

CHI_SQUARE_EPS = 1e-10
COSINE_EPS = 1e-10

FUSION_RULES = ("sum", "min", "max", "product")


def _pairwise(a, b, metric):
    """Dense distances between stacked descriptor rows (m, d) x (n, d)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if metric == METRIC_CHI_SQUARE:
        out = np.empty((a.shape[0], b.shape[0]))
        # Chunk the broadcast so a 10k x 10k matrix does not need m*n*d memory.
        chunk = max(1, int(2e7) // max(a.shape[1], 1))
        for start in range(0, a.shape[0], chunk):
            blk = a[start : start + chunk, None, :]
            diff = blk - b[None, :, :]
            denom = blk + b[None, :, :] + CHI_SQUARE_EPS
            out[start : start + chunk] = np.sum(diff * diff / denom, axis=2)
        return out
    if metric == METRIC_COSINE:
        dots = a @ b.T
        norms = np.linalg.norm(a, axis=1)[:, None] * np.linalg.norm(b, axis=1)[None, :]
        # The epsilon only guards zero vectors; max() keeps d(a, a) at 0,
        # and the outer clamp removes the last ulp of negative rounding.
        return np.maximum(1.0 - dots / np.maximum(norms, COSINE_EPS), 0.0)
    if metric == METRIC_WHITENED_EUCLIDEAN:
        out = np.empty((a.shape[0], b.shape[0]))
        chunk = max(1, int(2e7) // max(a.shape[1], 1))
        for start in range(0, a.shape[0], chunk):
            diff = a[start : start + chunk, None, :] - b[None, :, :]
            out[start : start + chunk] = np.sqrt(np.sum(diff * diff, axis=2))
        return out
    raise MetricMismatchError(f"unknown metric {metric!r}")


def distance(a, b):
    """Distance between two descriptors of the same kind/metric/length."""
    if a.kind != b.kind or a.metric != b.metric:
        raise MetricMismatchError(
            f"cannot compare {a.kind}/{a.metric} with {b.kind}/{b.metric}")
    if a.values.shape != b.values.shape:
        raise LengthMismatchError(
            f"descriptor lengths differ: {a.values.shape} vs {b.values.shape}")
    return float(_pairwise(a.values[None, :], b.values[None, :], a.metric)[0, 0])


@dataclass
class ScoreMatrix:
    probe_ids: list
    gallery_ids: list
    scores: np.ndarray
    normalized: bool = False
    kind: str = ""

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (len(self.probe_ids), len(self.gallery_ids)):
            raise ValueError(
                f"scores shape {self.scores.shape} inconsistent with "
                f"{len(self.probe_ids)} probes x {len(self.gallery_ids)} gallery")

    @property
    def self_mask(self):
        """Boolean (probes, gallery) mask of same-image pairs."""
        gallery_pos = {gid: j for j, gid in enumerate(self.gallery_ids)}
        mask = np.zeros(self.scores.shape, dtype=bool)
        for i, pid in enumerate(self.probe_ids):
            j = gallery_pos.get(pid)
            if j is not None:
                mask[i, j] = True
        return mask

    def take(self, probe_idx, gallery_idx):
        """Submatrix by integer index arrays (keeps the normalized flag)."""
        probe_idx = np.asarray(probe_idx, dtype=np.intp)
        gallery_idx = np.asarray(gallery_idx, dtype=np.intp)
        return ScoreMatrix(
            probe_ids=[self.probe_ids[i] for i in probe_idx],
            gallery_ids=[self.gallery_ids[j] for j in gallery_idx],
            scores=self.scores[np.ix_(probe_idx, gallery_idx)],
            normalized=self.normalized,
            kind=self.kind,
        )


def score_matrix(probe_ids, probes, gallery_ids, gallery, kind=None):
    """All-vs-all distance matrix between two descriptor lists.

    Every descriptor must share one kind and metric; the result records
    distances with self-pairs derivable from the id lists.
    """
    all_desc = list(probes) + list(gallery)
    kinds = {d.kind for d in all_desc}
    metrics = {d.metric for d in all_desc}
    if len(kinds) != 1 or len(metrics) != 1:
        raise MetricMismatchError(
            f"mixed descriptor kinds/metrics: {sorted(kinds)}/{sorted(metrics)}")
    lengths = {d.values.shape[0] for d in all_desc}
    if len(lengths) != 1:
        raise LengthMismatchError(f"mixed descriptor lengths: {sorted(lengths)}")
    a = np.stack([d.values for d in probes])
    b = np.stack([d.values for d in gallery])
    scores = _pairwise(a, b, metrics.pop())
    return ScoreMatrix(probe_ids=list(probe_ids), gallery_ids=list(gallery_ids),
                       scores=scores, normalized=False,
                       kind=kind if kind is not None else kinds.pop())


def minmax_normalize(matrix: ScoreMatrix):
    """Per-probe min-max normalization over non-self gallery entries.

    Constant rows map to 0.5 everywhere; self-pairs become NaN so they are
    excluded from everything downstream.  Idempotent.
    """
    self_mask = matrix.self_mask
    scores = matrix.scores.copy()
    out = np.full_like(scores, np.nan)
    for i in range(scores.shape[0]):
        row = scores[i]
        valid = ~self_mask[i] & ~np.isnan(row)
        if valid.sum() < 2:
            raise TooFewGalleryError(
                f"probe {matrix.probe_ids[i]!r} has {int(valid.sum())} non-self "
                "gallery entries; need >= 2")
        lo = row[valid].min()
        hi = row[valid].max()
        if hi > lo:
            out[i, valid] = (row[valid] - lo) / (hi - lo)
        else:
            out[i, valid] = 0.5
    return ScoreMatrix(probe_ids=list(matrix.probe_ids),
                       gallery_ids=list(matrix.gallery_ids),
                       scores=out, normalized=True, kind=matrix.kind)


def fuse(matrices, rule="sum", weights=None):
    """Combine normalized score matrices elementwise.

    The sum rule is the weighted mean (weights default to equal and are
    renormalized to sum 1), keeping fused scores in [0, 1]; min/max/product
    ignore weights.
    """
    if rule not in FUSION_RULES:
        raise ValueError(f"fusion rule must be one of {FUSION_RULES}")
    if not matrices:
        raise ValueError("need at least one matrix to fuse")
    first = matrices[0]
    for m in matrices:
        if not m.normalized:
            raise NotNormalizedError(f"matrix {m.kind!r} is not min-max normalized")
        if m.probe_ids != first.probe_ids or m.gallery_ids != first.gallery_ids:
            raise IdMismatchError("matrices disagree on probe/gallery id order")
    stack = np.stack([m.scores for m in matrices])
    if rule == "sum":
        w = np.ones(len(matrices)) if weights is None else np.asarray(weights, float)
        if w.shape != (len(matrices),) or w.sum() <= 0 or (w < 0).any():
            raise ValueError("weights must be non-negative, one per matcher")
        w = w / w.sum()
        fused = np.tensordot(w, stack, axes=1)
    elif rule == "min":
        fused = stack.min(axis=0)
    elif rule == "max":
        fused = stack.max(axis=0)
    else:
        fused = stack.prod(axis=0)
    return ScoreMatrix(probe_ids=list(first.probe_ids),
                       gallery_ids=list(first.gallery_ids),
                       scores=fused, normalized=True,
                       kind="+".join(m.kind for m in matrices))


# --- persistence --------------------------------------------------------------

def save_score_matrix(matrix: ScoreMatrix, base_path):
    """Write <base>.earn (scores tensor) plus <base>.json (ids/flags)."""
    from .nn.weights import save_weights

    base = str(base_path)
    save_weights(base + ".earn", {"scores": matrix.scores})
    meta = {
        "probe_ids": list(matrix.probe_ids),
        "gallery_ids": list(matrix.gallery_ids),
        "normalized": bool(matrix.normalized),
        "kind": matrix.kind,
    }
    with open(base + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_score_matrix(base_path):
    from .nn.weights import load_weights

    base = str(base_path)
    tensors = load_weights(base + ".earn")
    with open(base + ".json", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    return ScoreMatrix(probe_ids=meta["probe_ids"], gallery_ids=meta["gallery_ids"],
                       scores=np.asarray(tensors["scores"], dtype=np.float64),
                       normalized=meta["normalized"], kind=meta.get("kind", ""))


def export_score_csv(matrix: ScoreMatrix, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["probe_id"] + list(matrix.gallery_ids))
        for pid, row in zip(matrix.probe_ids, matrix.scores):
            writer.writerow([pid] + [repr(float(v)) for v in row])
