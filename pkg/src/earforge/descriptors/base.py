"""Descriptor value type and per-family parameter sets.

All handcrafted families consume the 128x128 normalized image.  Parameter
dataclasses stand in for the evaluation-toolbox defaults the literature
leaves unstated; everything is exposed so exact values can be dropped in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRIC_CHI_SQUARE = "chi-square"
METRIC_COSINE = "cosine"
METRIC_WHITENED_EUCLIDEAN = "whitened-euclidean"

#: Distance metric fixed by descriptor family.
FAMILY_METRICS = {
    "lbp": METRIC_CHI_SQUARE,
    "bsif": METRIC_CHI_SQUARE,
    "lpq": METRIC_CHI_SQUARE,
    "rilpq": METRIC_CHI_SQUARE,
    "poem": METRIC_CHI_SQUARE,
    "hog": METRIC_CHI_SQUARE,
    "dsift": METRIC_CHI_SQUARE,
    "gabor": METRIC_COSINE,
    "cnn": METRIC_COSINE,
    "pca": METRIC_WHITENED_EUCLIDEAN,
}

HANDCRAFTED_KINDS = ("lbp", "bsif", "lpq", "rilpq", "poem", "hog", "dsift", "gabor")

INPUT_SIZE = 128


@dataclass
class Descriptor:
    """Flat feature vector with its matching metric and family tag."""

    values: np.ndarray
    metric: str
    kind: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size == 0:
            raise ValueError("descriptor must be non-empty")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("descriptor contains non-finite values")


def check_input(img, name="img"):
    from ..exceptions import BadInputSizeError

    arr = np.asarray(img, dtype=np.float64)
    if arr.shape != (INPUT_SIZE, INPUT_SIZE):
        raise BadInputSizeError(
            f"{name} must be {INPUT_SIZE}x{INPUT_SIZE}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class LbpParams:
    radius: int = 2
    neighbors: int = 8
    cell_size: int = 16
    uniform: bool = True


@dataclass(frozen=True)
class LpqParams:
    window: int = 5
    cell_size: int = 16


@dataclass(frozen=True)
class RilpqParams:
    window: int = 5
    cell_size: int = 16


@dataclass(frozen=True)
class BsifParams:
    filter_size: int = 11
    n_filters: int = 8
    cell_size: int = 16
    filter_path: str = None
    allow_random: bool = False
    random_seed: int = 0


@dataclass(frozen=True)
class PoemParams:
    orientations: int = 3
    accum_size: int = 7
    lbp_radius: int = 2
    cell_size: int = 16


@dataclass(frozen=True)
class HogParams:
    orientations: int = 9
    cell_size: int = 8
    block_cells: int = 2
    clip: float = 0.2


@dataclass(frozen=True)
class DsiftParams:
    step: int = 16
    bin_size: int = 8
    spatial_bins: int = 4
    orientation_bins: int = 8


@dataclass(frozen=True)
class GaborParams:
    scales: int = 5
    orientations: int = 8
    pool: int = 4
    kmax: float = np.pi / 2
    freq_ratio: float = np.sqrt(2.0)
    sigma: float = 2.0 * np.pi


PARAM_TYPES = {
    "lbp": LbpParams,
    "lpq": LpqParams,
    "rilpq": RilpqParams,
    "bsif": BsifParams,
    "poem": PoemParams,
    "hog": HogParams,
    "dsift": DsiftParams,
    "gabor": GaborParams,
}


def default_params(kind):
    if kind not in PARAM_TYPES:
        raise ValueError(f"unknown handcrafted descriptor kind {kind!r}")
    return PARAM_TYPES[kind]()
