"""Scikit-learn style estimators wrapping the toolkit's fittable components.

These follow the fit/transform/predict conventions (parameters set in
``__init__``, learned state in trailing-underscore attributes) so the pieces
compose with sklearn pipelines and grid search.  Images are passed as lists
or arrays of 2-D grayscale arrays.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .augmentation import (
    STAGE1_SPEC,
    STAGE2_SPEC,
    augment_descriptor_training,
    augment_landmark_training,
    derive_seed,
)
from .descriptors import default_params, extract_handcrafted, pca_fit, pca_project
from .image import affine_resample
from .nn import (
    Network,
    TrainConfig,
    descriptor_network,
    landmark_network,
    landmark_predictor,
    load_weights,
    save_weights,
    side_network,
    train,
    two_stage_predict,
)
from .normalization import CropWindow, crop_window_map


def _as_image_stack(images, size=None):
    stack = np.stack([np.asarray(im, dtype=np.float32) for im in images])
    if size is not None and stack.shape[1:] != (size, size):
        raise ValueError(f"expected {size}x{size} images, got {stack.shape[1:]}")
    return stack


def _resample_stack(images, out_size):
    """Center-resample square images to ``out_size`` (identity if equal)."""
    first = np.asarray(images[0])
    if first.shape == (out_size, out_size):
        return _as_image_stack(images)
    src = first.shape[0]
    amap = crop_window_map(CropWindow(center=((src - 1) / 2.0, (src - 1) / 2.0),
                                      size=float(src)), out_size)
    return np.stack([
        affine_resample(np.asarray(im, dtype=np.float64), amap, out_size,
                        out_size).astype(np.float32)
        for im in images
    ])


class HandcraftedDescriptorExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer: normalized 128x128 images -> descriptor rows."""

    def __init__(self, kind="lbp", params=None):
        self.kind = kind
        self.params = params

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        params = self.params if self.params is not None else default_params(self.kind)
        return np.stack([extract_handcrafted(self.kind, im, params).values
                         for im in X])


class HolisticPcaDescriptor(BaseEstimator, TransformerMixin):
    """Eigen-ear transformer with component dropping and whitening."""

    def __init__(self, drop_count=20, keep_fraction=0.6):
        self.drop_count = drop_count
        self.keep_fraction = keep_fraction

    def fit(self, X, y=None):
        self.model_ = pca_fit(list(X), drop_count=self.drop_count,
                              keep_fraction=self.keep_fraction)
        return self

    def transform(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before transform")
        return np.stack([pca_project(self.model_, im).values for im in X])


class CnnDescriptorExtractor(BaseEstimator, TransformerMixin):
    """Trainable feature extractor (softmax phase, then softmax+center).

    ``scale_factor``/``input_size`` shrink the published architecture to desk
    scale; 1/128 reproduce it.  ``augment_per_image`` adds that many random
    rotation/crop/contrast variants of every training image.
    """

    def __init__(self, scale_factor=8, input_size=64, softmax_epochs=40,
                 patience_epochs=10, phase2_max_epochs=60, learning_rate=1e-3,
                 batch_size=32, center_loss_weight=0.003, center_update_rate=0.5,
                 augment_per_image=0, seed=0):
        self.scale_factor = scale_factor
        self.input_size = input_size
        self.softmax_epochs = softmax_epochs
        self.patience_epochs = patience_epochs
        self.phase2_max_epochs = phase2_max_epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.center_loss_weight = center_loss_weight
        self.center_update_rate = center_update_rate
        self.augment_per_image = augment_per_image
        self.seed = seed

    def fit(self, X, y):
        images = [np.asarray(im, dtype=np.float64) for im in X]
        labels = list(y)
        self.classes_ = sorted(set(labels))
        class_idx = {c: i for i, c in enumerate(self.classes_)}
        expanded, targets = [], []
        for i, (im, lab) in enumerate(zip(images, labels)):
            expanded.append(im)
            targets.append(class_idx[lab])
            for k in range(self.augment_per_image):
                expanded.append(augment_descriptor_training(
                    im, derive_seed(self.seed, "descaug", i, k)))
                targets.append(class_idx[lab])
        x = _resample_stack(expanded, self.input_size)
        self.net_ = Network(descriptor_network(self.scale_factor, self.input_size))
        config = TrainConfig(
            optimizer="adam", learning_rate=self.learning_rate,
            batch_size=self.batch_size, epochs=self.softmax_epochs,
            loss="softmax+center", center_loss_weight=self.center_loss_weight,
            center_update_rate=self.center_update_rate,
            patience_epochs=self.patience_epochs,
            phase2_max_epochs=self.phase2_max_epochs,
            num_classes=len(self.classes_), rng_seed=self.seed)
        result = train(self.net_, (x, np.asarray(targets)), config)
        self.params_ = result.params
        self.history_ = result.history
        return self

    def transform(self, X):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before transform")
        x = _resample_stack(list(X), self.input_size)
        return np.asarray(self.net_.forward(self.params_, x), dtype=np.float64)

    def save(self, path):
        save_weights(path, self.params_)

    def load(self, path):
        self.net_ = Network(descriptor_network(self.scale_factor, self.input_size))
        self.params_ = load_weights(path)
        return self


class TwoStageLandmarkDetector(BaseEstimator):
    """Coarse-to-fine landmark regressor over detector crops.

    ``fit`` expects source images with their 55-point annotations; training
    corpora are expanded per the stage sweeps (wide rotations + 20% jitter,
    then tight rotations + 10% jitter).  ``predict`` consumes detector crops
    plus their pull maps and returns landmarks in source coordinates.
    """

    def __init__(self, scale_factor=4, input_size=48, epochs=50,
                 learning_rate=0.1, momentum=0.9, batch_size=64,
                 crop_margin=1.3, stage1_spec=None, stage2_spec=None, seed=0):
        self.scale_factor = scale_factor
        self.input_size = input_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.crop_margin = crop_margin
        self.stage1_spec = stage1_spec
        self.stage2_spec = stage2_spec
        self.seed = seed

    def _specs(self):
        s1 = self.stage1_spec if self.stage1_spec is not None else STAGE1_SPEC
        s2 = self.stage2_spec if self.stage2_spec is not None else STAGE2_SPEC
        return (replace(s1, out_size=self.input_size, crop_margin=self.crop_margin),
                replace(s2, out_size=self.input_size, crop_margin=self.crop_margin))

    def _train_stage(self, images, landmark_sets, spec, stage_tag):
        xs, ys = [], []
        for i, (img, lm) in enumerate(zip(images, landmark_sets)):
            for sample, target in augment_landmark_training(
                    img, lm, spec, derive_seed(self.seed, stage_tag, i)):
                xs.append(sample.astype(np.float32))
                ys.append(target.astype(np.float32))
        net = Network(landmark_network(self.scale_factor, self.input_size))
        y = np.stack(ys)
        # Starting the output bias at the mean shape removes the large
        # constant component of the regression target.
        out_bias = net.param_name(len(net.spec.nodes) - 1, "b")
        config = TrainConfig(optimizer="nesterov-momentum",
                             learning_rate=self.learning_rate,
                             momentum=self.momentum, batch_size=self.batch_size,
                             epochs=self.epochs, loss="mse",
                             lr_decay_milestones=(0.8, 0.95),
                             rng_seed=derive_seed(self.seed, stage_tag),
                             init_overrides={out_bias: y.mean(axis=0)})
        result = train(net, (np.stack(xs), y), config)
        return net, result

    def fit(self, images, landmark_sets):
        spec1, spec2 = self._specs()
        self.stage1_net_, r1 = self._train_stage(images, landmark_sets, spec1,
                                                 "stage1")
        self.stage2_net_, r2 = self._train_stage(images, landmark_sets, spec2,
                                                 "stage2")
        self.stage1_params_ = r1.params
        self.stage2_params_ = r2.params
        self.history_ = {"stage1": r1.history, "stage2": r2.history}
        return self

    def _check_fitted(self):
        if not hasattr(self, "stage1_params_"):
            raise NotFittedError("call fit (or load) before predict")

    def predict_single_stage(self, crops, crop_maps):
        self._check_fitted()
        predict1 = landmark_predictor(self.stage1_net_, self.stage1_params_)
        return [cm.apply(predict1(np.asarray(c, dtype=np.float64)))
                for c, cm in zip(crops, crop_maps)]

    def predict(self, crops, crop_maps):
        self._check_fitted()
        predict1 = landmark_predictor(self.stage1_net_, self.stage1_params_)
        predict2 = landmark_predictor(self.stage2_net_, self.stage2_params_)
        return [two_stage_predict(predict1, predict2,
                                  np.asarray(c, dtype=np.float64), cm,
                                  margin=self.crop_margin)
                for c, cm in zip(crops, crop_maps)]

    def save(self, stage1_path, stage2_path):
        self._check_fitted()
        save_weights(stage1_path, self.stage1_params_)
        save_weights(stage2_path, self.stage2_params_)

    def load(self, stage1_path, stage2_path):
        self.stage1_net_ = Network(landmark_network(self.scale_factor,
                                                    self.input_size))
        self.stage2_net_ = Network(landmark_network(self.scale_factor,
                                                    self.input_size))
        self.stage1_params_ = load_weights(stage1_path)
        self.stage2_params_ = load_weights(stage2_path)
        return self


class EarSideClassifier(BaseEstimator, ClassifierMixin):
    """Left/right crop classifier (landmark architecture, 2 outputs)."""

    def __init__(self, scale_factor=8, input_size=48, epochs=30,
                 learning_rate=1e-3, batch_size=32, seed=0):
        self.scale_factor = scale_factor
        self.input_size = input_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        sides = [str(s).upper()[:1] for s in y]
        if set(sides) - {"L", "R"}:
            raise ValueError(f"sides must be L or R, got {sorted(set(sides))}")
        labels = np.array([0 if s == "L" else 1 for s in sides])
        x = _resample_stack(list(X), self.input_size)
        self.net_ = Network(side_network(self.scale_factor, self.input_size))
        config = TrainConfig(optimizer="adam", learning_rate=self.learning_rate,
                             batch_size=self.batch_size, epochs=self.epochs,
                             loss="softmax", num_classes=2, rng_seed=self.seed)
        result = train(self.net_, (x, labels), config)
        self.params_ = result.params
        self.classes_ = np.array(["L", "R"])
        return self

    def predict_proba(self, X):
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit (or load) before predict")
        x = _resample_stack(list(X), self.input_size)
        logits = self.net_.forward(self.params_, x).astype(np.float64)
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X):
        probs = self.predict_proba(X)
        # Ties go to the canonical left orientation.
        return np.where(probs[:, 0] >= probs[:, 1], "L", "R")

    def save(self, path):
        save_weights(path, self.params_)

    def load(self, path):
        self.net_ = Network(side_network(self.scale_factor, self.input_size))
        self.params_ = load_weights(path)
        self.classes_ = np.array(["L", "R"])
        return self
