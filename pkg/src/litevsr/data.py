"""Deterministic synthetic video clips whose class is a motion pattern.

Each clip shows a vertical soft bar translating horizontally with
wrap-around at a class-specific speed; the phase (start position) is the
only per-sample latent besides pixel noise. Speeds all sweep the full
width within a clip, so the time-averaged frame carries no class signal
and temporal modeling is genuinely required.

Generation is a pure function of (spec, split, label, index): identical
specs give bit-identical datasets.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError

_SPLIT_IDS = {"train": 0, "val": 1}
BAR_SIGMA = 1.3
SPEED_BASE = 1.2
SPEED_STEP = 0.6


@dataclass
class SyntheticDatasetSpec:
    num_classes: int = 10
    samples_per_class: int = 20
    val_samples_per_class: int = 5
    frames: int = 29
    height: int = 32
    width: int = 32
    noise_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError(f"data.num_classes: must be >= 2, got {self.num_classes}")
        if min(self.samples_per_class, self.frames, self.height, self.width) < 1:
            raise ConfigError("data: samples_per_class, frames, height and width must be positive")


def class_speed(label):
    return SPEED_BASE + SPEED_STEP * label


def make_clip(spec: SyntheticDatasetSpec, split: str, label: int, index: int) -> np.ndarray:
    rng = np.random.default_rng((spec.seed, _SPLIT_IDS[split], label, index))
    phase = rng.uniform(0.0, spec.width)
    speed = class_speed(label)
    t = np.arange(spec.frames, dtype=np.float64)
    centers = (phase + speed * t) % spec.width                      # [T]
    cols = np.arange(spec.width, dtype=np.float64)
    # circular horizontal distance from the bar center, per frame
    delta = cols[None, :] - centers[:, None]
    delta = (delta + spec.width / 2.0) % spec.width - spec.width / 2.0
    profile = np.exp(-0.5 * (delta / BAR_SIGMA) ** 2)               # [T, W]
    clip = np.broadcast_to(profile[:, None, :], (spec.frames, spec.height, spec.width)).copy()
    if spec.noise_std > 0:
        clip += rng.normal(0.0, spec.noise_std, clip.shape)
    clip -= clip.mean()
    clip /= max(clip.std(), 1e-8)
    return clip[None].astype(np.float32)                            # [1, T, H, W]


@dataclass
class SyntheticDataset:
    spec: SyntheticDatasetSpec
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray


def generate_synthetic(spec: SyntheticDatasetSpec) -> SyntheticDataset:
    def split_arrays(split, per_class):
        xs, ys = [], []
        for label in range(spec.num_classes):
            for index in range(per_class):
                xs.append(make_clip(spec, split, label, index))
                ys.append(label)
        return np.stack(xs), np.asarray(ys, dtype=np.int64)

    train_x, train_y = split_arrays("train", spec.samples_per_class)
    val_x, val_y = split_arrays("val", spec.val_samples_per_class)
    return SyntheticDataset(spec, train_x, train_y, val_x, val_y)


# ---------------------------------------------------------------------
# export / import
# ---------------------------------------------------------------------

def export_dataset(ds: SyntheticDataset, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, arr in (("train", ds.train_x), ("val", ds.val_x)):
        arr.astype("<f4").tofile(out / f"{name}.bin")
    sidecar = {
        "version": 1,
        "dtype": "float32-le",
        "spec": asdict(ds.spec),
        "train_shape": list(ds.train_x.shape),
        "val_shape": list(ds.val_x.shape),
        "train_labels": ds.train_y.tolist(),
        "val_labels": ds.val_y.tolist(),
    }
    (out / "dataset.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return out


def import_dataset(in_dir) -> SyntheticDataset:
    src = Path(in_dir)
    sidecar = json.loads((src / "dataset.json").read_text())
    if sidecar.get("dtype") != "float32-le":
        raise ConfigError(f"dataset.json: unsupported dtype {sidecar.get('dtype')!r}")
    spec = SyntheticDatasetSpec(**sidecar["spec"])

    def load(name, shape_key, label_key):
        shape = tuple(sidecar[shape_key])
        arr = np.fromfile(src / f"{name}.bin", dtype="<f4")
        if arr.size != int(np.prod(shape)):
            raise ShapeError(f"{name}.bin: {arr.size} values do not fill shape {shape}")
        return arr.reshape(shape), np.asarray(sidecar[label_key], dtype=np.int64)

    train_x, train_y = load("train", "train_shape", "train_labels")
    val_x, val_y = load("val", "val_shape", "val_labels")
    return SyntheticDataset(spec, train_x, train_y, val_x, val_y)
