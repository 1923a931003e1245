"""SGD training of the crop classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import Dataset, SplitSpec, as_arrays, split
from .model import Model, ModelConfig, build_model, forward, loss_and_grads


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    validation_fraction: float = 0.2
    augment: bool = False  # dihedral flips/rotations of training crops

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(
                f"validation fraction must lie in (0, 1), got {self.validation_fraction}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epoch count must be >= 1, got {self.epochs}")


@dataclass
class TrainReport:
    train_losses: list = field(default_factory=list)
    val_accuracies: list = field(default_factory=list)
    best_val_accuracy: float = 0.0
    best_epoch: int = -1
    model: Model = None


def sgd_step(m: Model, grads: list, velocity: list, cfg: TrainConfig) -> None:
    """In-place momentum update: v <- mu*v - lr*g; p <- p + v."""
    params = m.params()
    if len(grads) != len(params) or len(velocity) != len(params):
        raise ValueError("gradient/velocity lists do not match the parameter list")
    for p, g, v in zip(params, grads, velocity):
        if g.shape != p.shape or v.shape != p.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, velocity {v.shape}")
        v *= cfg.momentum
        v -= cfg.learning_rate * g
        p += v


_DIHEDRAL = 8  # 4 rotations x optional horizontal flip


def _apply_dihedral(x: np.ndarray, ops: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for i, op in enumerate(ops):
        img = x[i]
        if op >= 4:
            img = img[:, :, ::-1]
        out[i] = np.rot90(img, k=op % 4, axes=(1, 2))
    return out


def accuracy(m: Model, x: np.ndarray, y: np.ndarray, batch_size: int = 256) -> float:
    hits = 0
    for start in range(0, len(x), batch_size):
        probs = forward(m, x[start:start + batch_size])
        hits += int((probs.argmax(axis=1) == y[start:start + batch_size]).sum())
    return hits / len(x)


def train(config: ModelConfig, data: Dataset, cfg: TrainConfig) -> TrainReport:
    """Train on a stratified split of ``data``; fully determined by seeds.

    Returns the per-epoch loss/accuracy history and the parameters of the
    epoch with the best validation accuracy (earliest on ties).
    """
    counts = data.class_counts()
    if min(counts.values()) == 0:
        raise ValueError(f"dataset must contain both classes, got {counts}")
    if data.side != config.input_side:
        raise ValueError(f"dataset crops are {data.side}px, model expects {config.input_side}px")
    if data.channels != config.input_channels:
        raise ValueError(
            f"dataset has {data.channels} channels, model expects {config.input_channels}")

    train_ds, val_ds = split(data, SplitSpec(cfg.validation_fraction, cfg.seed))
    if not val_ds.items or not train_ds.items:
        raise ValueError("split produced an empty partition; adjust the validation fraction")
    x_train, y_train = as_arrays(train_ds)
    x_val, y_val = as_arrays(val_ds)

    model = build_model(config, cfg.seed)
    velocity = [np.zeros_like(p) for p in model.params()]
    shuffle_rng = np.random.default_rng([cfg.seed, 0x5E])

    report = TrainReport(model=model)
    best_params = [p.copy() for p in model.params()]
    n = len(x_train)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            if cfg.augment:
                xb = _apply_dihedral(xb, shuffle_rng.integers(0, _DIHEDRAL, size=len(idx)))
            loss, grads = loss_and_grads(model, xb, yb)
            sgd_step(model, grads, velocity, cfg)
            losses.append((loss, len(idx)))
        epoch_loss = sum(l * k for l, k in losses) / n
        val_acc = accuracy(model, x_val, y_val)
        report.train_losses.append(epoch_loss)
        report.val_accuracies.append(val_acc)
        if val_acc > report.best_val_accuracy or report.best_epoch < 0:
            report.best_val_accuracy = val_acc
            report.best_epoch = epoch
            best_params = [p.copy() for p in model.params()]

    for p, best in zip(model.params(), best_params):
        p[...] = best
    return report
