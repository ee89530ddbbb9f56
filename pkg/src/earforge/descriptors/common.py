"""Shared machinery for the code-histogram descriptor families.

Code maps are computed only where the full neighborhood fits (a margin is
cropped on every side); histogram cells are indexed by absolute pixel
position so edge cells simply accumulate fewer samples.  Cell histograms are
L1-normalized individually, with all-zero cells left at zero.
"""

from __future__ import annotations

import numpy as np

from .base import INPUT_SIZE


def neighbor_offsets(radius, neighbors):
    """Circle sample offsets (dx, dy), counter-clockwise from (+r, 0)."""
    angles = 2.0 * np.pi * np.arange(neighbors) / neighbors
    return radius * np.cos(angles), radius * np.sin(angles)


def sample_shifted(img, dx, dy, margin):
    """Bilinear sample of ``img`` shifted by a constant (dx, dy).

    Returns values for the valid grid ``img[margin:-margin, margin:-margin]``
    using difference-form interpolation (exact on constant images).
    """
    h, w = img.shape
    x0 = int(np.floor(dx))
    y0 = int(np.floor(dy))
    fx = dx - x0
    fy = dy - y0
    # Exactly integral offsets stay on their pixel so the margin is never
    # exceeded (offsets satisfy |offset| <= margin by construction).
    x1 = x0 + (1 if fx > 0 else 0)
    y1 = y0 + (1 if fy > 0 else 0)

    def block(oy, ox):
        return img[margin + oy : h - margin + oy, margin + ox : w - margin + ox]

    v00 = block(y0, x0)
    v01 = block(y0, x1)
    v10 = block(y1, x0)
    v11 = block(y1, x1)
    top = v00 + fx * (v01 - v00)
    bot = v10 + fx * (v11 - v10)
    return top + fy * (bot - top)


def uniform_lbp_table(neighbors=8):
    """Map raw codes to uniform-pattern bins (58 uniform + 1 catch-all for P=8).

    Uniform codes (at most two 0/1 transitions around the circle) get
    consecutive bins in ascending code order; everything else shares the
    last bin.
    """
    n_codes = 1 << neighbors
    table = np.empty(n_codes, dtype=np.intp)
    next_bin = 0
    for code in range(n_codes):
        bits = [(code >> k) & 1 for k in range(neighbors)]
        transitions = sum(bits[k] != bits[(k + 1) % neighbors] for k in range(neighbors))
        if transitions <= 2:
            table[code] = next_bin
            next_bin += 1
        else:
            table[code] = -1
    table[table == -1] = next_bin
    return table, next_bin + 1


def lbp_codes(img, radius=2, neighbors=8):
    """Strict-greater LBP codes over the valid region; returns (codes, margin).

    Equal neighbors contribute 0 bits, so constant regions code to 0.
    """
    img = np.asarray(img, dtype=np.float64)
    margin = int(np.ceil(radius))
    center = img[margin:-margin, margin:-margin]
    dxs, dys = neighbor_offsets(radius, neighbors)
    codes = np.zeros(center.shape, dtype=np.intp)
    for k in range(neighbors):
        neighbor = sample_shifted(img, dxs[k], dys[k], margin)
        codes |= (neighbor > center).astype(np.intp) << k
    return codes, margin


def cell_histograms(codes, n_bins, margin, cell_size, image_size=INPUT_SIZE,
                    weights=None):
    """Per-cell histograms of a code map cropped by ``margin`` on each side.

    Cells tile the original image; code pixels vote in the cell that holds
    their absolute position.  Returns an array of shape (cells_y, cells_x,
    n_bins) of raw counts (or summed weights).
    """
    n_cells = image_size // cell_size
    ys, xs = np.indices(codes.shape)
    cy = (ys + margin) // cell_size
    cx = (xs + margin) // cell_size
    flat = (cy * n_cells + cx) * n_bins + codes
    hist = np.bincount(flat.ravel(),
                       weights=None if weights is None else weights.ravel(),
                       minlength=n_cells * n_cells * n_bins)
    return hist.reshape(n_cells, n_cells, n_bins).astype(np.float64)


def l1_normalize_cells(hist):
    """Normalize each trailing-axis histogram to unit L1 norm (zeros stay zero)."""
    sums = hist.sum(axis=-1, keepdims=True)
    safe = np.where(sums > 0, sums, 1.0)
    return hist / safe


def image_gradients(img):
    """Central-difference gradients (gx, gy); one-sided at the borders."""
    arr = np.asarray(img, dtype=np.float64)
    gy, gx = np.gradient(arr)
    return gx, gy
