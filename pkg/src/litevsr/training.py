"""Desk-scale training loop: SGD with momentum and decoupled weight
decay, cosine learning-rate schedule, mixup, variable-length and spatial
augmentation, per-epoch validation with best-checkpoint saving.

Everything is driven by one seeded generator consumed in a fixed order,
so a (config, seed) pair reproduces losses, logs and checkpoints
bit-exactly in single-threaded runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .checkpoint import save_checkpoint
from .data import SyntheticDataset
from .errors import ConfigError, NumericError, ShapeError
from .tensor import Tensor, no_grad


@dataclass
class TrainConfig:
    lr_init: float = 0.01
    epochs: int = 20
    batch_size: int = 32
    weight_decay: float = 0.01
    dropout: float = 0.2
    momentum: float = 0.9
    mixup_alpha: float = 0.4
    var_len_min_keep: float = 0.5
    spatial_jitter: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"train.dropout: must be in [0, 1), got {self.dropout}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("train: epochs and batch_size must be positive")
        if not 0.0 < self.var_len_min_keep <= 1.0:
            raise ConfigError(f"train.var_len_min_keep: must be in (0, 1], got {self.var_len_min_keep}")


def cosine_lr(epoch, total_epochs, lr_init):
    if not 0 <= epoch <= total_epochs:
        raise ConfigError(f"cosine_lr: epoch {epoch} outside [0, {total_epochs}]")
    return lr_init * (1.0 + np.cos(np.pi * epoch / total_epochs)) / 2.0


def mixup(batch, labels_onehot, alpha, rng):
    """Convex combination of the batch with a permuted copy of itself."""
    if alpha <= 0:
        raise ConfigError(f"mixup: alpha must be positive, got {alpha}")
    if batch.shape[0] < 2:
        raise ShapeError("mixup: batch size must be >= 2")
    lam = rng.beta(alpha, alpha)
    perm = rng.permutation(batch.shape[0])
    lam = batch.dtype.type(lam)
    mixed_x = lam * batch + (1 - lam) * batch[perm]
    mixed_y = lam * labels_onehot + (1 - lam) * labels_onehot[perm]
    return mixed_x, mixed_y


def variable_length_augment(clip, min_keep, rng):
    """Keep a random contiguous temporal window, zero the rest; the clip
    keeps its full length so batch shapes stay fixed."""
    t = clip.shape[1]
    lo = int(np.ceil(min_keep * t))
    if lo < 1:
        raise ConfigError(f"variable_length_augment: min_keep {min_keep} keeps no frames of {t}")
    length = int(rng.integers(lo, t + 1))
    if length == t:
        return clip
    start = int(rng.integers(0, t - length + 1))
    out = np.zeros_like(clip)
    out[:, start:start + length] = clip[:, start:start + length]
    return out


def spatial_augment(clip, jitter, rng):
    """Random crop from a zero-padded frame plus horizontal flip."""
    if jitter > 0:
        c, t, h, w = clip.shape
        padded = np.zeros((c, t, h + 2 * jitter, w + 2 * jitter), dtype=clip.dtype)
        padded[:, :, jitter:jitter + h, jitter:jitter + w] = clip
        oy = int(rng.integers(0, 2 * jitter + 1))
        ox = int(rng.integers(0, 2 * jitter + 1))
        clip = padded[:, :, oy:oy + h, ox:ox + w]
    if rng.random() < 0.5:
        clip = clip[:, :, :, ::-1]
    return np.ascontiguousarray(clip)


class SGD:
    """Momentum SGD with decoupled weight decay:
    v <- momentum * v + grad; p <- p - lr * v - lr * decay * p."""

    def __init__(self, params, momentum=0.9, weight_decay=0.0):
        self.params = list(params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr):
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                continue
            v *= self.momentum
            v += p.grad
            decay = lr * self.weight_decay * p.data
            p.data -= lr * v
            p.data -= decay


@dataclass
class TrainLogRow:
    epoch: int
    lr: float
    train_loss: float
    val_acc: float


@dataclass
class TrainResult:
    rows: list
    best_val_acc: float
    best_epoch: int
    checkpoint_path: object = None

    def log_csv(self) -> str:
        lines = ["epoch,lr,train_loss,val_acc"]
        for r in self.rows:
            lines.append(f"{r.epoch},{r.lr:.8f},{r.train_loss:.6f},{r.val_acc:.6f}")
        return "\n".join(lines) + "\n"


def _onehot(labels, num_classes, dtype=np.float32):
    out = np.zeros((labels.shape[0], num_classes), dtype=dtype)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _diagnose_nonfinite(model, clip):
    """Name the first model stage whose activations go non-finite."""
    with no_grad():
        model.eval()
        x = model.frontend(clip)
        if not np.isfinite(x.data).all():
            return "frontend"
        x = ops.transpose(x, (0, 2, 1))
        for i, block in enumerate(model.seq.blocks):
            x = block(x)
            if not np.isfinite(x.data).all():
                return f"seq.blocks.{i}"
        x = model.head(x)
        if not np.isfinite(x.data).all():
            return "head"
    return "loss"


def evaluate(model, x, y, batch_size=32) -> float:
    if x.shape[0] == 0:
        raise ShapeError("evaluate: empty dataset")
    model.eval()
    correct = 0
    with no_grad():
        for lo in range(0, x.shape[0], batch_size):
            xb = Tensor(x[lo:lo + batch_size])
            probs = model(xb)
            correct += int((probs.data.argmax(axis=1) == y[lo:lo + batch_size]).sum())
    return correct / x.shape[0]


def train(model, dataset: SyntheticDataset, cfg: TrainConfig, ckpt_path=None) -> TrainResult:
    num_classes = model.spec.num_classes
    if num_classes != dataset.spec.num_classes:
        raise ShapeError(
            f"train: model head has {num_classes} classes, dataset {dataset.spec.num_classes}")
    model.reseed_dropout(cfg.seed)
    opt = SGD(model.parameters(), cfg.momentum, cfg.weight_decay)
    rng = np.random.default_rng((cfg.seed, 0xA0))
    n = dataset.train_x.shape[0]
    rows = []
    best_acc = -1.0
    best_epoch = -1

    for epoch in range(cfg.epochs):
        lr = cosine_lr(epoch, cfg.epochs, cfg.lr_init)
        model.train(True)
        order = rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            xb = dataset.train_x[idx].copy()
            for i in range(xb.shape[0]):
                xb[i] = variable_length_augment(xb[i], cfg.var_len_min_keep, rng)
                xb[i] = spatial_augment(xb[i], cfg.spatial_jitter, rng)
            yb = _onehot(dataset.train_y[idx], num_classes)
            if cfg.mixup_alpha > 0 and xb.shape[0] >= 2:
                xb, yb = mixup(xb, yb, cfg.mixup_alpha, rng)
            clip = Tensor(xb)
            logits = model.logits(clip)
            loss = ops.cross_entropy(logits, yb)
            loss_val = float(loss.data)
            if not np.isfinite(loss_val):
                where = _diagnose_nonfinite(model, clip)
                raise NumericError(f"train: non-finite loss at epoch {epoch}; first bad stage: {where}")
            model.zero_grad()
            loss.backward()
            opt.step(lr)
            losses.append(loss_val)
        val_acc = evaluate(model, dataset.val_x, dataset.val_y, cfg.batch_size)
        rows.append(TrainLogRow(epoch, float(lr), float(np.mean(losses)), val_acc))
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            if ckpt_path is not None:
                save_checkpoint(model, ckpt_path)
    return TrainResult(rows, best_acc, best_epoch, ckpt_path)
