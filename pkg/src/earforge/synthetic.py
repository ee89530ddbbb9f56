"""Parametric synthetic ears: deformed ellipses with ridge texture.

The renderer evaluates an analytic intensity function at pixel centers after
mapping them through the inverse pose, so two renders of the same shape under
different affine poses correspond exactly (no resampling chain); landmarks
are the contour stations mapped through the forward pose.  Used by the
experiment suite and the bundled demo fixture.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .geometry import N_LANDMARKS, save_landmarks
from .image import AffineMap, save_image
from .manifest import save_manifest


@dataclass(frozen=True)
class EarShape:
    """Subject-specific contour and texture parameters in the shape frame."""

    height: float                 # vertical semi-axis (shape units)
    width: float                  # horizontal semi-axis
    harmonics: tuple              # radial deformation amplitudes (m = 2, 3, ...)
    phases: tuple
    ridge_freq: float
    ridge_phase: float
    lobe_angle: float
    side: str = "L"


def random_ear_shape(rng, side="L"):
    n_harm = 3
    return EarShape(
        height=rng.uniform(0.95, 1.10),
        width=rng.uniform(0.58, 0.74),
        harmonics=tuple(rng.uniform(0.02, 0.07, size=n_harm).tolist()),
        phases=tuple(rng.uniform(0.0, 2.0 * math.pi, size=n_harm).tolist()),
        ridge_freq=rng.uniform(2.5, 4.5),
        ridge_phase=rng.uniform(0.0, 2.0 * math.pi),
        lobe_angle=rng.uniform(0.6, 1.4),
        side=side,
    )


def _contour_radius(shape: EarShape, theta):
    """Radius of the deformed ellipse at polar angle theta (shape frame).

    The vertical (y) semi-axis is ``height`` and the horizontal ``width``.
    """
    a, b = shape.height, shape.width
    base = a * b / np.sqrt((a * np.cos(theta)) ** 2 + (b * np.sin(theta)) ** 2)
    bump = np.zeros_like(theta, dtype=np.float64)
    for m, (amp, ph) in enumerate(zip(shape.harmonics, shape.phases), start=2):
        bump += amp * np.cos(m * theta + ph)
    return base * (1.0 + bump)


def shape_landmarks(shape: EarShape):
    """55 contour stations at fixed angles; right ears mirror the x axis."""
    theta = 2.0 * math.pi * (np.arange(N_LANDMARKS) + 0.5) / N_LANDMARKS
    r = _contour_radius(shape, theta)
    xs = r * np.cos(theta)
    ys = r * np.sin(theta)
    if shape.side == "R":
        xs = -xs
    return np.column_stack([xs, ys])


def _intensity(shape: EarShape, xs, ys):
    """Analytic shading: smooth outer edge, contour-following ridges, a lobe."""
    if shape.side == "R":
        xs = -xs
    theta = np.arctan2(ys, xs)
    rb = _contour_radius(shape, theta)
    u = np.hypot(xs, ys) / rb

    edge = np.clip((1.0 - u) / 0.08, 0.0, 1.0)
    edge = edge * edge * (3.0 - 2.0 * edge)  # smoothstep
    ridges = 0.5 + 0.5 * np.cos(2.0 * math.pi * shape.ridge_freq * u
                                + shape.ridge_phase)
    dth = np.mod(theta - shape.lobe_angle + math.pi, 2.0 * math.pi) - math.pi
    lobe = np.exp(-(dth / 0.55) ** 2)
    img = 0.06 + edge * (0.20 + 0.34 * ridges * (0.35 + 0.65 * np.minimum(u, 1.0))
                         + 0.22 * lobe * np.clip(1.0 - u, 0.0, 1.0))
    return np.clip(img, 0.0, 1.0)


def make_pose(center, scale=1.0, angle_deg=0.0, width_factor=1.0):
    """Forward map shape frame -> image: per-axis scale, rotation, translation.

    ``width_factor`` compresses the shape's own x axis before rotation (a
    pose-change proxy for out-of-plane yaw).
    """
    sx, sy = (scale, scale) if np.isscalar(scale) else scale
    s = np.array([[sx * width_factor, 0.0], [0.0, sy]])
    ang = math.radians(angle_deg)
    c, sn = math.cos(ang), math.sin(ang)
    rot = np.array([[c, -sn], [sn, c]])
    return AffineMap(rot @ s, np.asarray(center, dtype=np.float64))


def render_ear(shape: EarShape, pose: AffineMap, size):
    """Render to a (size, size) image; returns (image, landmarks)."""
    inv = pose.inverse()
    us, vs = np.meshgrid(np.arange(size, dtype=np.float64),
                         np.arange(size, dtype=np.float64))
    m, t = inv.matrix, inv.translation
    xs = m[0, 0] * us + m[0, 1] * vs + t[0]
    ys = m[1, 0] * us + m[1, 1] * vs + t[1]
    img = _intensity(shape, xs, ys)
    landmarks = pose.apply(shape_landmarks(shape))
    return img, landmarks


def render_standard(shape, size=160, rng=None, rotation=0.0, scale_jitter=0.0,
                    width_factor=1.0, center_jitter=0.0):
    """Render with a mildly randomized pose centered in the canvas."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    base_scale = size * 0.30
    scale = base_scale * (1.0 + (rng.uniform(-scale_jitter, scale_jitter)
                                 if scale_jitter else 0.0))
    center = np.array([size / 2.0, size / 2.0])
    if center_jitter:
        center = center + rng.uniform(-center_jitter, center_jitter, size=2) * size
    pose = make_pose(center, scale=scale, angle_deg=rotation,
                     width_factor=width_factor)
    return render_ear(shape, pose, size)


def synthetic_dataset(n, seed=0, size=160, rotation_range=12.0,
                      scale_jitter=0.12, width_range=(0.78, 1.0)):
    """n rendered (image, landmarks) pairs with per-sample random shape/pose."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        shape = random_ear_shape(rng)
        rotation = rng.uniform(-rotation_range, rotation_range)
        width = rng.uniform(*width_range)
        img, lm = render_standard(shape, size=size, rng=rng, rotation=rotation,
                                  scale_jitter=scale_jitter, width_factor=width,
                                  center_jitter=0.03)
        out.append((img, lm))
    return out


def build_fixture(out_dir, n_subjects=8, per_subject=5, seed=0, size=160,
                  split="train", sides="L", rotation_range=15.0,
                  scale_jitter=0.12, width_range=(0.8, 1.0)):
    """Write a PNG+landmark fixture dataset and its manifest; returns the path.

    Subjects get a fixed shape; images vary pose (rotation, scale, width
    compression).  ``sides`` is "L" for all-left or "LR" to alternate, with
    right ears rendered mirrored.
    """
    os.makedirs(out_dir, exist_ok=True)
    img_dir = os.path.join(out_dir, "images")
    lm_dir = os.path.join(out_dir, "landmarks")
    os.makedirs(img_dir, exist_ok=True)
    os.makedirs(lm_dir, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for s in range(n_subjects):
        shape_left = random_ear_shape(rng, side="L")
        for i in range(per_subject):
            side = "L" if sides == "L" else ("L" if i % 2 == 0 else "R")
            shape = shape_left if side == "L" else replace(shape_left, side="R")
            rotation = rng.uniform(-rotation_range, rotation_range)
            width = rng.uniform(*width_range)
            img, lm = render_standard(shape, size=size, rng=rng,
                                      rotation=rotation,
                                      scale_jitter=scale_jitter,
                                      width_factor=width, center_jitter=0.02)
            image_id = f"s{s:02d}_i{i:02d}"
            img_name = os.path.join("images", image_id + ".png")
            lm_name = os.path.join("landmarks", image_id + ".json")
            save_image(img, os.path.join(out_dir, img_name))
            save_landmarks(lm, os.path.join(out_dir, lm_name))
            rows.append({
                "image_path": img_name,
                "image_id": image_id,
                "subject_id": f"subj{s:02d}",
                "side": side,
                "split": split,
                "fold": None,
                "bbox": None,
                "landmarks_path": lm_name,
            })
    manifest_path = os.path.join(out_dir, "manifest.csv")
    save_manifest(rows, manifest_path)
    return manifest_path
