"""Handcrafted and holistic descriptor families."""

from __future__ import annotations

from .base import (
    Descriptor,
    FAMILY_METRICS,
    HANDCRAFTED_KINDS,
    BsifParams,
    DsiftParams,
    GaborParams,
    HogParams,
    LbpParams,
    LpqParams,
    PoemParams,
    RilpqParams,
    default_params,
)
from .bsif import bsif_length, extract_bsif, make_random_bsif_filters
from .dsift import dsift_length, extract_dsift
from .gabor import extract_gabor, gabor_length
from .hog import extract_hog, hog_length
from .holistic import PcaModel, pca_fit, pca_project
from .lbp import extract_lbp, lbp_length
from .lpq import extract_lpq, extract_rilpq, lpq_length, rilpq_length
from .poem import extract_poem, poem_length

_EXTRACTORS = {
    "lbp": extract_lbp,
    "bsif": extract_bsif,
    "lpq": extract_lpq,
    "rilpq": extract_rilpq,
    "poem": extract_poem,
    "hog": extract_hog,
    "dsift": extract_dsift,
    "gabor": extract_gabor,
}

_LENGTHS = {
    "lbp": lbp_length,
    "bsif": bsif_length,
    "lpq": lpq_length,
    "rilpq": rilpq_length,
    "poem": poem_length,
    "hog": hog_length,
    "dsift": dsift_length,
    "gabor": gabor_length,
}


def extract_handcrafted(kind, img, params=None):
    """Extract one handcrafted family and tag it with its fixed metric."""
    if kind not in _EXTRACTORS:
        raise ValueError(f"unknown handcrafted descriptor kind {kind!r}")
    values = _EXTRACTORS[kind](img, params)
    return Descriptor(values=values, metric=FAMILY_METRICS[kind], kind=kind)


def descriptor_length(kind, params=None, image_size=128):
    """Predicted vector length from the family's parameter arithmetic."""
    if kind not in _LENGTHS:
        raise ValueError(f"unknown handcrafted descriptor kind {kind!r}")
    return _LENGTHS[kind](params, image_size)


__all__ = [
    "Descriptor", "FAMILY_METRICS", "HANDCRAFTED_KINDS",
    "LbpParams", "LpqParams", "RilpqParams", "BsifParams", "PoemParams",
    "HogParams", "DsiftParams", "GaborParams", "default_params",
    "extract_handcrafted", "descriptor_length",
    "extract_lbp", "extract_lpq", "extract_rilpq", "extract_bsif",
    "extract_poem", "extract_hog", "extract_dsift", "extract_gabor",
    "make_random_bsif_filters",
    "PcaModel", "pca_fit", "pca_project",
]
