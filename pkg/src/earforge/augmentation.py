"""Seed-deterministic training-set expansion.

Landmark-detector corpora are built per source image: one sample per rotation
step applied to the upright-aligned ear, each carrying a single random
per-axis scale and translation draw.  Descriptor-net expansion applies random
rotation, crop and contrast to normalized 128x128 images.  Everything is a
pure function of (inputs, seed).
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .exceptions import BadInputSizeError, EmptySubjectError
from .geometry import check_landmarks, principal_frame
from .image import AffineMap, adjust_contrast, affine_resample
from .normalization import NORMALIZED_SIZE, landmark_crop_window

#: Detector stage-1 expansion: wide rotations, 20% scale/translation jitter.
STAGE1_SPEC = None  # assigned after AugmentSpec is defined
#: Detector stage-2 expansion: tight rotations, 10% jitter.
STAGE2_SPEC = None

_MAX_REDRAWS = 10


@dataclass(frozen=True)
class AugmentSpec:
    """Rotation sweep plus random scale/translation jitter for one stage."""

    rotation_min: float
    rotation_max: float
    rotation_step: float
    scale_jitter: float
    translation_jitter: float
    out_size: int = 96
    crop_margin: float = 1.3  # window side relative to the ear extent

    def __post_init__(self):
        if self.rotation_min > self.rotation_max:
            raise ValueError("rotation_min must be <= rotation_max")
        if self.rotation_step <= 0:
            raise ValueError("rotation_step must be > 0")
        for j in (self.scale_jitter, self.translation_jitter):
            if not 0.0 <= j <= 1.0:
                raise ValueError(f"jitter {j} outside [0, 1]")
        if self.out_size < 1 or self.crop_margin <= 0:
            raise ValueError("out_size and crop_margin must be positive")

    def rotation_angles(self):
        """Sweep angles in degrees; count = floor((max - min) / step) + 1."""
        count = int(math.floor((self.rotation_max - self.rotation_min)
                               / self.rotation_step + 1e-9)) + 1
        return [self.rotation_min + i * self.rotation_step for i in range(count)]


STAGE1_SPEC = AugmentSpec(-45.0, 45.0, 3.0, scale_jitter=0.2, translation_jitter=0.2)
STAGE2_SPEC = AugmentSpec(-15.0, 15.0, 1.0, scale_jitter=0.1, translation_jitter=0.1)


def normalize_target(points_px, out_size):
    """Flatten (55, 2) pixel coordinates to a [-1, 1] interleaved 110-vector."""
    pts = np.asarray(points_px, dtype=np.float64)
    half = out_size / 2.0
    return ((pts - half) / half).reshape(-1)


def denormalize_target(target, out_size):
    """Inverse of :func:`normalize_target`."""
    half = out_size / 2.0
    return np.asarray(target, dtype=np.float64).reshape(-1, 2) * half + half


def augment_landmark_training(img, lm, spec: AugmentSpec, rng_seed):
    """Expand one annotated image into one sample per rotation step.

    Each sample resamples the *original* image through a single composed
    affine map (upright alignment, sweep rotation, random per-axis scale,
    random window translation), so only one interpolation pass happens.
    Draws pushing any landmark outside the frame are redrawn up to 10 times,
    then targets are clamped.

    Returns a list of ``(image, target)`` with ``image`` of shape
    ``(out_size, out_size)`` and ``target`` the 110-vector in [-1, 1].
    """
    pts = check_landmarks(lm)
    arr = np.asarray(img, dtype=np.float64)
    frame = principal_frame(pts)
    upright = AffineMap.rotation(frame.angle, center=frame.center)
    lm_up = upright.apply(pts)
    window = landmark_crop_window(lm_up, margin=spec.crop_margin)
    c0 = np.array(window.center)
    size = window.size
    out = spec.out_size
    half = (out - 1) / 2.0
    rng = np.random.default_rng(rng_seed)

    samples = []
    for angle_deg in spec.rotation_angles():
        rot = AffineMap.rotation(math.radians(angle_deg), center=c0)
        lm_rot = rot.apply(lm_up)
        # upright frame -> source, after undoing the sweep rotation
        back = upright.inverse().compose(rot.inverse())
        for attempt in range(_MAX_REDRAWS + 1):
            sx = 1.0 + rng.uniform(-spec.scale_jitter, spec.scale_jitter)
            sy = 1.0 + rng.uniform(-spec.scale_jitter, spec.scale_jitter)
            tx = rng.uniform(-spec.translation_jitter, spec.translation_jitter) * size
            ty = rng.uniform(-spec.translation_jitter, spec.translation_jitter) * size
            # Output pixel -> rotated-frame coordinates of the jittered window.
            scale_x = size / (sx * out)
            scale_y = size / (sy * out)
            win_map = AffineMap(np.diag([scale_x, scale_y]),
                                np.array([c0[0] + tx - half * scale_x,
                                          c0[1] + ty - half * scale_y]))
            pull = back.compose(win_map)
            lm_out = win_map.inverse().apply(lm_rot)
            target = normalize_target(lm_out, out)
            if np.abs(target).max() <= 1.0 or attempt == _MAX_REDRAWS:
                break
        target = np.clip(target, -1.0, 1.0)
        sample = affine_resample(arr, pull, out, out)
        samples.append((sample, target))
    return samples


def _descriptor_augment(img, angle_deg, crop_frac, fx, fy, contrast):
    """Apply one rotation+crop+contrast triple to a 128x128 image."""
    arr = np.asarray(img, dtype=np.float64)
    size = arr.shape[0]
    side = crop_frac * size
    ox = fx * (size - side)
    oy = fy * (size - side)
    scale = side / size
    win_map = AffineMap(np.diag([scale, scale]), np.array([ox, oy]))
    center = (size - 1) / 2.0
    rot = AffineMap.rotation(math.radians(angle_deg), center=(center, center))
    pull = rot.inverse().compose(win_map)
    out = affine_resample(arr, pull, size, size)
    return adjust_contrast(out, contrast)


def augment_descriptor_training(img, rng_seed):
    """One random augmentation of a normalized 128x128 image.

    Rotation in [-10, 10] degrees, crop covering 85-100% of the image placed
    uniformly, contrast factor in [0.5, 1.5]; bit-identical for a fixed seed.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.shape != (NORMALIZED_SIZE, NORMALIZED_SIZE):
        raise BadInputSizeError(
            f"descriptor augmentation expects {NORMALIZED_SIZE}x{NORMALIZED_SIZE}, "
            f"got {arr.shape}")
    rng = np.random.default_rng(rng_seed)
    angle = rng.uniform(-10.0, 10.0)
    crop_frac = rng.uniform(0.85, 1.0)
    fx = rng.uniform(0.0, 1.0)
    fy = rng.uniform(0.0, 1.0)
    contrast = rng.uniform(0.5, 1.5)
    return _descriptor_augment(arr, angle, crop_frac, fx, fy, contrast)


def derive_seed(root_seed, *parts):
    """Stable per-item seed: crc32 over the root seed and item tags."""
    text = ":".join([str(int(root_seed) & 0xFFFFFFFF)] + [str(p) for p in parts])
    return zlib.crc32(text.encode("utf-8"))


def balance_subjects(rows, target_per_subject, rng_seed):
    """Replicate manifest rows so every subject has exactly the target count.

    Replication counts per original differ by at most one; which originals
    receive the extra replica is a seeded draw.  Each output entry copies the
    source row and adds ``replica`` (0 = the original image), ``augment``
    (True for replicas >= 1) and a distinct ``aug_seed``.
    """
    if target_per_subject < 1:
        raise ValueError("target_per_subject must be >= 1")
    by_subject = {}
    for row in rows:
        sid = str(row.get("subject_id", "")).strip()
        if not sid:
            raise EmptySubjectError(f"row {row.get('image_id')!r} has no subject_id")
        by_subject.setdefault(sid, []).append(row)

    rng = np.random.default_rng(rng_seed)
    out = []
    for sid in sorted(by_subject):
        group = by_subject[sid]
        k = len(group)
        base, rem = divmod(target_per_subject, k)
        extras = set(rng.choice(k, size=rem, replace=False).tolist()) if rem else set()
        for idx, row in enumerate(group):
            reps = base + (1 if idx in extras else 0)
            for r in range(reps):
                entry = dict(row)
                entry["replica"] = r
                entry["augment"] = r > 0
                entry["aug_seed"] = derive_seed(rng_seed, row.get("image_id", idx), r)
                out.append(entry)
    return out
