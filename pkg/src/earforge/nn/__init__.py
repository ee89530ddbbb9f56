"""Minimal NHWC tensor network engine and the toolkit's three architectures."""

from .network import LayerSpec, NetworkSpec, Network, landmark_network, descriptor_network, side_network
from .losses import loss_mse, loss_softmax, loss_center
from .optim import NesterovMomentum, Adam
from .train import TrainConfig, TrainResult, train, save_history_csv
from .weights import save_weights, load_weights
from .cascade import (
    landmark_predictor,
    rectification_map,
    two_stage_predict,
    predict_landmarks_two_stage,
    extract_cnn_descriptor,
    classify_side,
)

__all__ = [
    "LayerSpec", "NetworkSpec", "Network",
    "landmark_network", "descriptor_network", "side_network",
    "loss_mse", "loss_softmax", "loss_center",
    "NesterovMomentum", "Adam",
    "TrainConfig", "TrainResult", "train", "save_history_csv",
    "save_weights", "load_weights",
    "landmark_predictor", "rectification_map", "two_stage_predict",
    "predict_landmarks_two_stage",
    "extract_cnn_descriptor", "classify_side",
]
