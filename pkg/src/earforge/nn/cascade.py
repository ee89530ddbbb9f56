"""Inference plumbing: two-stage landmark cascade, descriptor and side heads.

The cascade runs the first regressor on the detector crop, estimates a pose
frame from its output, re-crops an upright rectified view, and runs the
second regressor there.  All coordinate hand-offs use pull maps (output
frame -> source frame), so applying a map to predicted points converts them
back toward the original image.
"""

from __future__ import annotations

import numpy as np

from ..augmentation import denormalize_target
from ..descriptors.base import Descriptor
from ..exceptions import ShapeMismatchError
from ..geometry import principal_frame
from ..image import AffineMap, affine_resample
from ..normalization import crop_window_map, landmark_crop_window


def landmark_predictor(net, params):
    """Wrap a trained regressor as ``square image -> (55, 2)`` crop coords."""

    def predict(img):
        arr = np.asarray(img, dtype=np.float32)
        if arr.shape != tuple(net.input_shape[:2]):
            raise ShapeMismatchError(
                f"expected {net.input_shape[:2]} crop, got {arr.shape}")
        vec = net.forward(params, arr[None, :, :, None])[0]
        return denormalize_target(vec, arr.shape[0])

    return predict


def rectification_map(lm_src, size, margin=1.3):
    """Pull map (rectified output -> source) centered on a landmark estimate.

    Upright-aligns the estimated pose and frames the landmark extent (scaled
    by ``margin``) in a ``size`` x ``size`` view.  Raises
    DegenerateLandmarksError for collapsed or isotropic landmark clouds.
    """
    frame = principal_frame(lm_src)
    upright = AffineMap.rotation(frame.angle, center=frame.center)
    window = landmark_crop_window(upright.apply(lm_src), margin=margin)
    return upright.inverse().compose(crop_window_map(window, size))


def two_stage_predict(predict1, predict2, crop, crop_map: AffineMap, margin=1.3):
    """Cascade two crop-level predictors into original-image landmarks.

    ``predict1``/``predict2`` map a square crop to (55, 2) landmarks in crop
    coordinates; ``crop_map`` is the pull map that produced ``crop`` from the
    source image.  Raises DegenerateLandmarksError when the stage-1 output
    collapses to a point or an isotropic cloud.
    """
    crop = np.asarray(crop, dtype=np.float64)
    size = crop.shape[0]
    lm1_src = crop_map.apply(predict1(crop))
    rect_pull_src = rectification_map(lm1_src, size, margin=margin)
    rect_pull_crop = crop_map.inverse().compose(rect_pull_src)
    rect_img = affine_resample(crop, rect_pull_crop, size, size)
    lm2 = predict2(rect_img)
    return rect_pull_src.apply(lm2)


def predict_landmarks_two_stage(stage1_net, stage1_params, stage2_net, stage2_params,
                                crop, crop_map, margin=1.3):
    """Two-stage prediction from trained networks (see two_stage_predict)."""
    return two_stage_predict(
        landmark_predictor(stage1_net, stage1_params),
        landmark_predictor(stage2_net, stage2_params),
        crop, crop_map, margin=margin)


def extract_cnn_descriptor(net, params, img):
    """Eval-mode forward pass tagged for cosine matching."""
    arr = np.asarray(img, dtype=np.float32)
    if arr.shape != tuple(net.input_shape[:2]):
        raise ShapeMismatchError(
            f"expected {net.input_shape[:2]} image, got {arr.shape}")
    values = net.forward(params, arr[None, :, :, None])[0]
    return Descriptor(values=np.asarray(values, dtype=np.float64),
                      metric="cosine", kind="cnn")


def classify_side(net, params, img):
    """Left/right decision with softmax confidence; ties go to left."""
    arr = np.asarray(img, dtype=np.float32)
    if net.output_width != 2:
        raise ShapeMismatchError("side classifier must have exactly 2 outputs")
    if arr.shape != tuple(net.input_shape[:2]):
        raise ShapeMismatchError(
            f"expected {net.input_shape[:2]} crop, got {arr.shape}")
    logits = net.forward(params, arr[None, :, :, None])[0].astype(np.float64)
    z = logits - logits.max()
    probs = np.exp(z) / np.exp(z).sum()
    side = "left" if probs[0] >= probs[1] else "right"
    return side, float(probs.max())
