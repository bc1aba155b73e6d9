"""Composite building blocks.

* GhostModule: pointwise (optionally wider) primary convolution producing
  a channel fraction, a cheap depthwise convolution expanding it, outputs
  concatenated. Drop-in replacement for a convolution of the same width.
* DFCAttention: downsample by 2, pointwise then two directional (1x5 and
  5x1) depthwise convolutions, sigmoid gate, nearest upsample back.
* GhostV2Module: ghost output gated elementwise by DFC attention.
* PartialTemporalBlock: channel split by ratio, an operation branch on the
  first part, identity on the rest, concat, residual add; the core kind
  selects Temporal / Shuffle / Faster internals and their merge order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .costmodel import CostRow
from .errors import ShapeError
from .layers import (
    BatchNorm,
    Conv,
    Dropout,
    Identity,
    Module,
    ReLU,
    chain_rows,
    make_activation,
)
from .tensor import Tensor


@dataclass
class GhostConfig:
    in_channels: int
    out_channels: int
    ratio: float = 0.5
    cheap_kernel: int = 3
    dimensionality: int = 2
    primary_kernel: int = 1
    stride: int = 1
    dilation: int = 1
    causal: bool = False

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ShapeError(f"ghost: ratio must be in (0, 1), got {self.ratio}")
        if self.primary_channels < 1:
            raise ShapeError(f"ghost: ratio {self.ratio} gives no primary channels for out={self.out_channels}")
        if self.dimensionality not in (1, 2):
            raise ShapeError(f"ghost: dimensionality must be 1 or 2, got {self.dimensionality}")
        if self.causal and self.dimensionality != 1:
            raise ShapeError("ghost: causal mode requires 1-D")

    @property
    def primary_channels(self):
        return int(np.floor(self.ratio * self.out_channels))

    @property
    def cheap_channels(self):
        return self.out_channels - self.primary_channels


class GhostModule(Module):
    def __init__(self, cfg: GhostConfig, dtype=np.float32, rng=None):
        super().__init__()
        self.cfg = cfg
        rank = cfg.dimensionality
        pad = "causal-left" if cfg.causal else "symmetric"
        pc, cc = cfg.primary_channels, cfg.cheap_channels
        self.primary = Conv(rank, cfg.in_channels, pc, cfg.primary_kernel, stride=cfg.stride,
                            dilation=cfg.dilation, padding=pad, dtype=dtype, rng=rng)
        self.bn1 = BatchNorm(pc, dtype=dtype)
        # depthwise multiplier covers cheap widths that are not a multiple
        # of the primary width; surplus channels are trimmed before bn2
        self.multiplier = -(-cc // pc)
        self.cheap = Conv(rank, pc, self.multiplier * pc, cfg.cheap_kernel, groups=pc,
                          padding=pad, dtype=dtype, rng=rng)
        self.bn2 = BatchNorm(cc, dtype=dtype)
        self.act1 = ReLU()
        self.act2 = ReLU()

    def forward(self, x):
        if x.shape[1] != self.cfg.in_channels:
            raise ShapeError(f"ghost: input has {x.shape[1]} channels, expected {self.cfg.in_channels}")
        x1 = self.act1(self.bn1(self.primary(x)))
        raw = self.cheap(x1)
        cc = self.cfg.cheap_channels
        if raw.shape[1] != cc:
            raw = ops.getitem(raw, (slice(None), slice(0, cc)))
        x2 = self.act2(self.bn2(raw))
        return ops.concat_channels(x1, x2)

    def cost_rows(self, path, shape, conv):
        rows, s1 = chain_rows([("primary", self.primary), ("bn1", self.bn1), ("act1", self.act1)],
                              path, shape, conv)
        r2, s2 = chain_rows([("cheap", self.cheap)], path, s1, conv)
        s2 = s2[:1] + (self.cfg.cheap_channels,) + s2[2:]
        r3, _ = chain_rows([("bn2", self.bn2), ("act2", self.act2)], path, s2, conv)
        out = s1[:1] + (self.cfg.out_channels,) + s1[2:]
        return rows + r2 + r3, out


@dataclass
class DFCConfig:
    channels: int
    out_channels: int = None
    horizontal_kernel: int = 5
    vertical_kernel: int = 5
    downsample_factor: int = 2

    def __post_init__(self):
        if self.out_channels is None:
            self.out_channels = self.channels


class DFCAttention(Module):
    """Decoupled fully-connected attention map in (0, 1)."""

    def __init__(self, cfg: DFCConfig, dtype=np.float32, rng=None):
        super().__init__()
        self.cfg = cfg
        c = cfg.out_channels
        self.pw = Conv(2, cfg.channels, c, 1, dtype=dtype, rng=rng)
        self.bn1 = BatchNorm(c, dtype=dtype)
        self.horizontal = Conv(2, c, c, (1, cfg.horizontal_kernel), groups=c, dtype=dtype, rng=rng)
        self.bn2 = BatchNorm(c, dtype=dtype)
        self.vertical = Conv(2, c, c, (cfg.vertical_kernel, 1), groups=c, dtype=dtype, rng=rng)
        self.bn3 = BatchNorm(c, dtype=dtype)

    def forward(self, x, target_spatial=None):
        n, c, h, w = x.shape
        if h < 2 or w < 2:
            raise ShapeError(f"dfc: spatial dims must be >= 2, got {h}x{w}")
        f = self.cfg.downsample_factor
        a = ops.avg_pool(x, (f, f), (f, f))
        a = self.bn1(self.pw(a))
        a = self.bn2(self.horizontal(a))
        a = self.bn3(self.vertical(a))
        a = ops.sigmoid(a)
        return ops.upsample_nearest(a, target_spatial or (h, w))

    def cost_rows(self, path, shape, conv):
        f = self.cfg.downsample_factor
        pooled = shape[:2] + (shape[2] // f, shape[3] // f)
        if conv.count_elementwise_macs:
            rows = [CostRow(f"{path}.pool", 0, int(np.prod(pooled)) * f * f)]
        else:
            rows = []
        r, s = chain_rows([("pw", self.pw), ("bn1", self.bn1), ("horizontal", self.horizontal),
                           ("bn2", self.bn2), ("vertical", self.vertical), ("bn3", self.bn3)],
                          path, pooled, conv)
        rows += r
        out = (shape[0], self.cfg.out_channels) + shape[2:]
        if conv.count_elementwise_macs:
            rows.append(CostRow(f"{path}.gate", 0, int(np.prod(s)) + int(np.prod(out))))
        return rows, out


class GhostV2Module(Module):
    """Ghost module whose whole output is gated by DFC attention."""

    def __init__(self, ghost_cfg: GhostConfig, dfc_cfg: DFCConfig = None, dtype=np.float32, rng=None):
        super().__init__()
        if ghost_cfg.dimensionality != 2:
            raise ShapeError("ghostv2: DFC attention needs 2-D features")
        self.ghost = GhostModule(ghost_cfg, dtype=dtype, rng=rng)
        dfc_cfg = dfc_cfg or DFCConfig(ghost_cfg.in_channels, ghost_cfg.out_channels)
        if dfc_cfg.out_channels != ghost_cfg.out_channels:
            raise ShapeError("ghostv2: attention width must match ghost output width")
        self.attention = DFCAttention(dfc_cfg, dtype=dtype, rng=rng)

    def forward(self, x):
        y = self.ghost(x)
        gate = self.attention(x, target_spatial=y.shape[2:])
        if gate.shape != y.shape:
            raise ShapeError(f"ghostv2: gate shape {gate.shape} != ghost shape {y.shape}")
        return ops.mul(y, gate)

    def cost_rows(self, path, shape, conv):
        rows, out = self.ghost.cost_rows(f"{path}.ghost", shape, conv)
        r2, _ = self.attention.cost_rows(f"{path}.attention", shape, conv)
        rows += r2
        if conv.count_elementwise_macs:
            rows.append(CostRow(f"{path}.gate_mul", 0, int(np.prod(out))))
        return rows, out


# ---------------------------------------------------------------------
# partial temporal block
# ---------------------------------------------------------------------

CORE_KINDS = ("Temporal", "Shuffle", "Faster", "Identity")


@dataclass
class PartialBlockConfig:
    channels: int
    ratio: float = 0.75
    core: str = "Faster"
    kernel: int = 3
    dilation: int = 1
    dropout: float = 0.0
    activation: str = "relu"
    mlp_expand: float = 2.0
    shuffle_groups: int = 2
    shuffle_bn_after_dw: bool = True

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ShapeError(f"partial: ratio must be in (0, 1], got {self.ratio}")
        if self.branch_channels < 1:
            raise ShapeError(f"partial: ratio {self.ratio} gives an empty compute branch")
        if self.core not in CORE_KINDS:
            raise ShapeError(f"partial: unknown core {self.core!r}, expected one of {CORE_KINDS}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ShapeError(f"partial: kernel must be a positive odd integer, got {self.kernel}")
        if not 0.0 <= self.dropout < 1.0:
            raise ShapeError(f"partial: dropout must be in [0, 1), got {self.dropout}")

    @property
    def branch_channels(self):
        return int(np.floor(self.ratio * self.channels))


class TemporalCore(Module):
    """Two repetitions of dilated causal conv, batch norm, activation,
    dropout; channel count and sequence length are preserved."""

    def __init__(self, channels, kernel, dilation, dropout=0.0, activation="relu",
                 dtype=np.float32, rng=None):
        super().__init__()
        self.stages = []
        for _ in range(2):
            self.stages.append(Conv(1, channels, channels, kernel, dilation=dilation,
                                    padding="causal-left", dtype=dtype, rng=rng))
            self.stages.append(BatchNorm(channels, dtype=dtype))
            self.stages.append(make_activation(activation))
            self.stages.append(Dropout(dropout))

    def forward(self, x):
        for stage in self.stages:
            x = stage(x)
        return x

    def cost_rows(self, path, shape, conv):
        return chain_rows([(f"stages.{i}", m) for i, m in enumerate(self.stages)], path, shape, conv)


class ShuffleCore(Module):
    """Pointwise, depthwise causal, pointwise stack on the compute branch;
    the channel mix happens in the enclosing block after the residual."""

    def __init__(self, channels, kernel, dilation=1, activation="relu", bn_after_dw=True,
                 dtype=np.float32, rng=None):
        super().__init__()
        self.pw1 = Conv(1, channels, channels, 1, dtype=dtype, rng=rng)
        self.bn1 = BatchNorm(channels, dtype=dtype)
        self.act1 = make_activation(activation)
        self.dw = Conv(1, channels, channels, kernel, dilation=dilation, groups=channels,
                       padding="causal-left", dtype=dtype, rng=rng)
        self.bn_dw = BatchNorm(channels, dtype=dtype) if bn_after_dw else Identity()
        self.pw2 = Conv(1, channels, channels, 1, dtype=dtype, rng=rng)
        self.bn2 = BatchNorm(channels, dtype=dtype)
        self.act2 = make_activation(activation)

    def forward(self, x):
        x = self.act1(self.bn1(self.pw1(x)))
        x = self.bn_dw(self.dw(x))
        return self.act2(self.bn2(self.pw2(x)))

    def cost_rows(self, path, shape, conv):
        order = [("pw1", self.pw1), ("bn1", self.bn1), ("act1", self.act1), ("dw", self.dw),
                 ("bn_dw", self.bn_dw), ("pw2", self.pw2), ("bn2", self.bn2), ("act2", self.act2)]
        return chain_rows(order, path, shape, conv)


class FasterCore(Module):
    """Single causal convolution; the block applies the restoring MLP on
    the merged output."""

    def __init__(self, channels, kernel, dilation=1, dtype=np.float32, rng=None):
        super().__init__()
        self.conv = Conv(1, channels, channels, kernel, dilation=dilation,
                         padding="causal-left", dtype=dtype, rng=rng)

    def forward(self, x):
        return self.conv(x)

    def cost_rows(self, path, shape, conv):
        return chain_rows([("conv", self.conv)], path, shape, conv)


def _build_core(cfg: PartialBlockConfig, dtype, rng):
    ch = cfg.branch_channels
    if cfg.core == "Temporal":
        return TemporalCore(ch, cfg.kernel, cfg.dilation, cfg.dropout, cfg.activation, dtype, rng)
    if cfg.core == "Shuffle":
        return ShuffleCore(ch, cfg.kernel, cfg.dilation, cfg.activation, cfg.shuffle_bn_after_dw, dtype, rng)
    if cfg.core == "Faster":
        return FasterCore(ch, cfg.kernel, cfg.dilation, dtype, rng)
    return Identity()


class PartialTemporalBlock(Module):
    """Split, operate on one part, concatenate, residual add.

    Shuffle cores mix channels after the residual; Faster cores run the
    expansion MLP on the merged features before it. For Shuffle and
    Faster cores dropout is applied to the compute-branch output
    (Temporal cores carry their own).
    """

    def __init__(self, cfg: PartialBlockConfig, core: Module = None, dtype=np.float32, rng=None):
        super().__init__()
        self.cfg = cfg
        self.core = core if core is not None else _build_core(cfg, dtype, rng)
        self.branch_dropout = Dropout(cfg.dropout) if cfg.core in ("Shuffle", "Faster") else Identity()
        if cfg.core == "Faster" and core is None:
            c = cfg.channels
            hidden = int(round(cfg.mlp_expand * c))
            self.mlp = [
                Conv(1, c, hidden, 1, dtype=dtype, rng=rng),
                BatchNorm(hidden, dtype=dtype),
                make_activation(cfg.activation),
                Conv(1, hidden, c, 1, dtype=dtype, rng=rng),
            ]
        else:
            self.mlp = []

    def forward(self, x):
        cfg = self.cfg
        if x.shape[1] != cfg.channels:
            raise ShapeError(f"partial: input has {x.shape[1]} channels, expected {cfg.channels}")
        x1, x2 = ops.split_channels(x, cfg.ratio)
        x3 = self.branch_dropout(self.core(x1))
        merged = ops.concat_channels(x3, x2)
        for stage in self.mlp:
            merged = stage(merged)
        out = ops.add(merged, x)
        if cfg.core == "Shuffle":
            out = ops.channel_shuffle(out, cfg.shuffle_groups)
        return out

    def cost_rows(self, path, shape, conv):
        cfg = self.cfg
        branch_shape = shape[:1] + (cfg.branch_channels,) + shape[2:]
        rows, _ = self.core.cost_rows(f"{path}.core", branch_shape, conv)
        if self.mlp:
            r, _ = chain_rows([(f"mlp.{i}", m) for i, m in enumerate(self.mlp)], path, shape, conv)
            rows += r
        if conv.count_elementwise_macs:
            rows.append(CostRow(f"{path}.residual", 0, int(np.prod(shape))))
        return rows, shape
