"""Training loop: batching, loss schedules, determinism.

Everything random (parameter init, epoch shuffles, dropout masks) flows from
one generator seeded by the config, so a fixed seed reproduces the loss curve
bit for bit.  The descriptor schedule runs a softmax-only phase for the
configured epoch count and then adds the center loss until the training loss
stops improving for ``patience_epochs`` epochs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DivergedError, EmptyInputError
from .losses import loss_center, loss_mse, loss_softmax
from .optim import Adam, NesterovMomentum

LOSSES = ("mse", "softmax", "softmax+center")
OPTIMIZERS = ("nesterov-momentum", "adam")


@dataclass
class TrainConfig:
    optimizer: str = "nesterov-momentum"
    learning_rate: float = 0.01
    momentum: float = 0.9
    betas: tuple = (0.9, 0.999)
    batch_size: int = 128
    epochs: int = 100
    loss: str = "mse"
    center_loss_weight: float = 0.003
    center_update_rate: float = 0.5
    patience_epochs: int = 50
    phase2_max_epochs: int = 1000
    lr_decay_milestones: tuple = (0.5, 0.75)  # nesterov only, x0.1 each
    rng_seed: int = 0
    num_classes: int = 0
    dtype: object = np.float32
    init_overrides: dict = None  # parameter name -> initial value

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.center_loss_weight < 0:
            raise ValueError("center_loss_weight must be >= 0")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.loss in ("softmax", "softmax+center") and self.num_classes < 2:
            raise ValueError("softmax losses need num_classes >= 2")


@dataclass
class TrainResult:
    params: dict
    history: list = field(default_factory=list)  # rows: (epoch, phase, loss)
    centers: np.ndarray = None


def _make_optimizer(config):
    if config.optimizer == "adam":
        return Adam(learning_rate=config.learning_rate, betas=tuple(config.betas))
    return NesterovMomentum(learning_rate=config.learning_rate,
                            momentum=config.momentum)


def train(net, dataset, config: TrainConfig):
    """Train ``net`` on ``dataset = (inputs, targets)`` under the config.

    For softmax losses a linear classification head is added automatically
    when the network's output width differs from ``num_classes`` (the
    descriptor net emits features, the side classifier emits logits
    directly).  The center loss always acts on the network output.
    """
    x, y = dataset
    x = np.asarray(x)
    if x.shape[0] == 0:
        raise EmptyInputError("training set is empty")
    if config.loss == "mse":
        y = np.asarray(y, dtype=config.dtype)
    else:
        y = np.asarray(y, dtype=np.intp)
    x = x.astype(config.dtype, copy=False)

    rng = np.random.default_rng(config.rng_seed)
    params = net.init_params(rng, dtype=config.dtype)
    if config.init_overrides:
        for key, value in config.init_overrides.items():
            if key not in params:
                raise ValueError(f"init override for unknown parameter {key!r}")
            params[key] = np.asarray(value, dtype=config.dtype).reshape(
                params[key].shape)

    use_head = (config.loss in ("softmax", "softmax+center")
                and net.output_width != config.num_classes)
    if use_head:
        fan_in = net.output_width
        params["head_w"] = (rng.standard_normal((fan_in, config.num_classes))
                            * np.sqrt(1.0 / fan_in)).astype(config.dtype)
        params["head_b"] = np.zeros(config.num_classes, dtype=config.dtype)

    centers = None
    if config.loss == "softmax+center":
        centers = np.zeros((config.num_classes, net.output_width), dtype=np.float64)

    opt = _make_optimizer(config)
    milestones = {int(frac * config.epochs) for frac in config.lr_decay_milestones}
    history = []
    n = x.shape[0]

    def run_epoch(epoch, phase, with_center):
        total, seen = 0.0, 0
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = x[idx]
            out, cache = net.forward_cached(params, xb, train=True, rng=rng)
            if config.loss == "mse":
                loss, dout = loss_mse(out, y[idx])
            else:
                logits = out @ params["head_w"] + params["head_b"] if use_head else out
                loss, dlogits = loss_softmax(logits, y[idx])
                head_grads = {}
                if use_head:
                    head_grads["head_w"] = out.T @ dlogits
                    head_grads["head_b"] = dlogits.sum(axis=0)
                    dout = dlogits @ params["head_w"].T
                else:
                    dout = dlogits
                if with_center:
                    closs, cgrad, new_centers = loss_center(
                        out, y[idx], centers, config.center_loss_weight,
                        config.center_update_rate)
                    loss += closs
                    dout = dout + cgrad
                    centers[...] = new_centers
            if not np.isfinite(loss):
                raise DivergedError(f"non-finite loss at epoch {epoch} ({phase})")
            grads = net.backward(params, cache, dout.astype(config.dtype, copy=False))
            if config.loss != "mse" and use_head:
                grads.update(head_grads)
            opt.step(params, grads)
            total += loss * len(idx)
            seen += len(idx)
        mean_loss = total / seen
        history.append((epoch, phase, mean_loss))
        return mean_loss

    phase1 = "softmax" if config.loss == "softmax+center" else config.loss
    for epoch in range(config.epochs):
        if config.optimizer == "nesterov-momentum" and epoch in milestones and epoch > 0:
            opt.learning_rate *= 0.1
        run_epoch(epoch, phase1, with_center=False)

    if config.loss == "softmax+center":
        best = np.inf
        stale = 0
        epoch = config.epochs
        while stale < config.patience_epochs and (epoch - config.epochs) < config.phase2_max_epochs:
            loss = run_epoch(epoch, "softmax+center", with_center=True)
            if loss < best - 1e-12:
                best = loss
                stale = 0
            else:
                stale += 1
            epoch += 1

    return TrainResult(params=params, history=history, centers=centers)


def save_history_csv(history, path):
    """Write training history rows as (epoch, phase, loss) CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "phase", "loss"])
        for epoch, phase, loss in history:
            writer.writerow([epoch, phase, repr(float(loss))])
