"""Model assembly: 3-D stem, residual frontend (standard / ghost /
ghostv2), sequence models (multi-scale TCN, densely connected TCN,
partial-block TCN) and the softmax classification head.

The multi-scale and dense TCN internals are reconstructions of the usual
designs; their width, growth and dilation constants below were tuned once
against the target component budgets and are frozen here (the shipped
table configs depend on them).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .blocks import DFCConfig, GhostConfig, GhostModule, GhostV2Module, PartialBlockConfig, PartialTemporalBlock
from .costmodel import CostRow
from .errors import ShapeError
from .layers import (
    BatchNorm,
    Conv,
    Dropout,
    GlobalAvgPool2d,
    Identity,
    Linear,
    MaxPool2d,
    Module,
    ReLU,
    Sequential,
    chain_rows,
)

RESNET_STAGE_WIDTHS = (64, 128, 256, 512)
FEATURE_WIDTH = 512

MSTCN_KERNELS = (3, 5, 7)
MSTCN_BLOCKS = 4
MSTCN_DILATIONS = (1, 2, 4, 8)
MSTCN_DEFAULT_WIDTH = 768

DCTCN_BLOCKS = 4
DCTCN_UNITS_PER_BLOCK = 4
DCTCN_KERNELS = (3, 5, 7)
DCTCN_GROWTH = 630
DCTCN_BOTTLENECK = 320
DCTCN_UNIT_DILATIONS = (2, 4, 8, 16)
DCTCN_DEFAULT_WIDTH = 512


@dataclass(frozen=True)
class InputSpec:
    frames: int = 29
    height: int = 88
    width: int = 88
    channels: int = 1


@dataclass
class ModelSpec:
    frontend_variant: str = "standard"
    seq_model: str = "mstcn"
    seq_ghost: bool = False
    partial_core: str = "Faster"
    ratio: float = 0.75
    kernel: int = 3
    dilations: tuple = (1, 2, 4, 8)
    hidden_width: int = None
    num_classes: int = 500
    mlp_expand: float = 2.0
    ghost_frontend_primary_kernels: tuple = (3, 1)
    input_spec: InputSpec = field(default_factory=InputSpec)

    def __post_init__(self):
        if self.frontend_variant not in ("standard", "ghost", "ghostv2"):
            raise ShapeError(f"model: unknown frontend_variant {self.frontend_variant!r}")
        if self.seq_model not in ("mstcn", "dctcn", "partial"):
            raise ShapeError(f"model: unknown seq_model {self.seq_model!r}")
        if self.num_classes < 2:
            raise ShapeError(f"model: num_classes must be >= 2, got {self.num_classes}")
        self.dilations = tuple(int(d) for d in self.dilations)
        if self.seq_model == "partial":
            if len(self.dilations) != 4:
                raise ShapeError(f"model: partial TCN needs 4 dilations, got {len(self.dilations)}")
            if any(b <= a for a, b in zip(self.dilations, self.dilations[1:])):
                raise ShapeError(f"model: partial TCN dilations must be strictly increasing, got {self.dilations}")
        if self.hidden_width is None:
            self.hidden_width = MSTCN_DEFAULT_WIDTH if self.seq_model == "mstcn" else DCTCN_DEFAULT_WIDTH if self.seq_model == "dctcn" else FEATURE_WIDTH
        if self.seq_model == "mstcn" and self.hidden_width % 3:
            raise ShapeError(f"model: mstcn width must be divisible by 3, got {self.hidden_width}")
        self.ghost_frontend_primary_kernels = tuple(self.ghost_frontend_primary_kernels)


# ---------------------------------------------------------------------
# frontend
# ---------------------------------------------------------------------

class Stem3D(Module):
    """5x7x7 spatio-temporal stem: conv (spatial stride 2), BN, ReLU,
    then a per-frame 3x3 stride-2 max pool."""

    def __init__(self, out_channels=64, dtype=np.float32, rng=None):
        super().__init__()
        self.conv = Conv(3, 1, out_channels, (5, 7, 7), stride=(1, 2, 2), dtype=dtype, rng=rng)
        self.bn = BatchNorm(out_channels, dtype=dtype)
        self.act = ReLU()
        self.pool = MaxPool2d(3, 2, 1)

    def forward(self, x):
        x = self.act(self.bn(self.conv(x)))
        n, c, t, h, w = x.shape
        frames = ops.reshape(ops.transpose(x, (0, 2, 1, 3, 4)), (n * t, c, h, w))
        pooled = self.pool(frames)
        _, _, h2, w2 = pooled.shape
        return ops.transpose(ops.reshape(pooled, (n, t, c, h2, w2)), (0, 2, 1, 3, 4))

    def cost_rows(self, path, shape, conv):
        rows, s = chain_rows([("conv", self.conv), ("bn", self.bn), ("act", self.act)], path, shape, conv)
        n, c, t, h, w = s
        r, sp = self.pool.cost_rows(f"{path}.pool", (n * t, c, h, w), conv)
        rows += r
        return rows, (n, c, t, sp[2], sp[3])


class BasicBlock(Module):
    """Residual block with two 3x3 units; ghost variants swap each unit
    for a ghost (or ghost+DFC) module of the same width."""

    def __init__(self, in_channels, out_channels, stride=1, variant="standard",
                 ghost_primary_kernels=(3, 1), dtype=np.float32, rng=None):
        super().__init__()
        self.variant = variant
        if variant == "standard":
            self.units = [
                Conv(2, in_channels, out_channels, 3, stride=stride, dtype=dtype, rng=rng),
                BatchNorm(out_channels, dtype=dtype),
                ReLU(),
                Conv(2, out_channels, out_channels, 3, dtype=dtype, rng=rng),
                BatchNorm(out_channels, dtype=dtype),
            ]
        else:
            k1, k2 = ghost_primary_kernels
            cfg1 = GhostConfig(in_channels, out_channels, primary_kernel=k1, stride=stride)
            cfg2 = GhostConfig(out_channels, out_channels, primary_kernel=k2)
            if variant == "ghost":
                self.units = [GhostModule(cfg1, dtype=dtype, rng=rng),
                              GhostModule(cfg2, dtype=dtype, rng=rng)]
            else:
                self.units = [
                    GhostV2Module(cfg1, DFCConfig(in_channels, out_channels), dtype=dtype, rng=rng),
                    GhostV2Module(cfg2, DFCConfig(out_channels, out_channels), dtype=dtype, rng=rng),
                ]
        if stride != 1 or in_channels != out_channels:
            self.proj = Conv(2, in_channels, out_channels, 1, stride=stride, dtype=dtype, rng=rng)
            self.proj_bn = BatchNorm(out_channels, dtype=dtype)
        else:
            self.proj = None
            self.proj_bn = None
        self.act_out = ReLU()

    def forward(self, x):
        main = x
        for unit in self.units:
            main = unit(main)
        skip = self.proj_bn(self.proj(x)) if self.proj is not None else x
        return self.act_out(ops.add(main, skip))

    def cost_rows(self, path, shape, conv):
        names = [f"units.{i}" for i in range(len(self.units))]
        rows, out = chain_rows(list(zip(names, self.units)), path, shape, conv)
        if self.proj is not None:
            r, _ = chain_rows([("proj", self.proj), ("proj_bn", self.proj_bn)], path, shape, conv)
            rows += r
        if conv.count_elementwise_macs:
            rows.append(CostRow(f"{path}.residual", 0, 2 * int(np.prod(out))))
        return rows, out


class ResNetTrunk(Module):
    """Per-frame 18-layer residual trunk: 4 stages of 2 basic blocks,
    widths 64/128/256/512, spatial stride 2 at stage entries 2 to 4,
    finished with a global spatial average pool."""

    def __init__(self, variant="standard", ghost_primary_kernels=(3, 1), dtype=np.float32, rng=None):
        super().__init__()
        self.blocks = []
        in_ch = RESNET_STAGE_WIDTHS[0]
        for stage, width in enumerate(RESNET_STAGE_WIDTHS):
            for b in range(2):
                stride = 2 if (stage > 0 and b == 0) else 1
                self.blocks.append(BasicBlock(in_ch, width, stride, variant,
                                              ghost_primary_kernels, dtype=dtype, rng=rng))
                in_ch = width
        self.pool = GlobalAvgPool2d()

    def forward(self, x):
        for block in self.blocks:
            x = block(x)
        return self.pool(x)

    def cost_rows(self, path, shape, conv):
        rows, s = chain_rows([(f"blocks.{i}", b) for i, b in enumerate(self.blocks)], path, shape, conv)
        r, out = self.pool.cost_rows(f"{path}.pool", s, conv)
        return rows + r, out


class Frontend(Module):
    """Stem plus per-frame trunk; maps [N, 1, T, H, W] to [N, T, 512]."""

    def __init__(self, variant="standard", ghost_primary_kernels=(3, 1), dtype=np.float32, rng=None):
        super().__init__()
        self.variant = variant
        self.stem = Stem3D(dtype=dtype, rng=rng)
        self.trunk = ResNetTrunk(variant, ghost_primary_kernels, dtype=dtype, rng=rng)

    def forward(self, clip):
        if clip.ndim != 5:
            raise ShapeError(f"frontend: expected [N, C, T, H, W], got {clip.shape}")
        if clip.shape[3] < 32 or clip.shape[4] < 32:
            raise ShapeError(f"frontend: spatial input must be at least 32x32, got {clip.shape[3]}x{clip.shape[4]}")
        x = self.stem(clip)
        n, c, t, h, w = x.shape
        frames = ops.reshape(ops.transpose(x, (0, 2, 1, 3, 4)), (n * t, c, h, w))
        feats = self.trunk(frames)
        return ops.reshape(feats, (n, t, FEATURE_WIDTH))

    def cost_rows(self, path, shape, conv):
        rows, s = self.stem.cost_rows(f"{path}.stem", shape, conv)
        n, c, t, h, w = s
        r, out = self.trunk.cost_rows(f"{path}.trunk", (n * t, c, h, w), conv)
        rows += r
        return rows, (n, t, out[1])


# ---------------------------------------------------------------------
# sequence models
# ---------------------------------------------------------------------

def _make_branch_conv(kernel, in_ch, out_ch, dilation, ghost, dtype, rng):
    if ghost:
        cfg = GhostConfig(in_ch, out_ch, dimensionality=1, primary_kernel=kernel,
                          dilation=dilation, causal=True)
        return GhostModule(cfg, dtype=dtype, rng=rng)
    conv = Conv(1, in_ch, out_ch, kernel, dilation=dilation, padding="causal-left", dtype=dtype, rng=rng)
    return _ConvBnRelu(conv, out_ch, dtype)


class _ConvBnRelu(Module):
    def __init__(self, conv, channels, dtype):
        super().__init__()
        self.conv = conv
        self.bn = BatchNorm(channels, dtype=dtype)
        self.act = ReLU()

    def forward(self, x):
        return self.act(self.bn(self.conv(x)))

    def cost_rows(self, path, shape, conv):
        return chain_rows([("conv", self.conv), ("bn", self.bn), ("act", self.act)], path, shape, conv)


class MSTCNBlock(Module):
    """Two multi-branch causal layers (kernels 3/5/7, each a third of the
    width), concatenated, with a residual projection."""

    def __init__(self, in_channels, width, dilation, ghost=False, dropout=0.0, dtype=np.float32, rng=None):
        super().__init__()
        if width % len(MSTCN_KERNELS):
            raise ShapeError(f"mstcn: width {width} not divisible by {len(MSTCN_KERNELS)}")
        bw = width // len(MSTCN_KERNELS)
        self.layer1 = [_make_branch_conv(k, in_channels, bw, dilation, ghost, dtype, rng) for k in MSTCN_KERNELS]
        self.layer2 = [_make_branch_conv(k, width, bw, dilation, ghost, dtype, rng) for k in MSTCN_KERNELS]
        self.drop1 = Dropout(dropout)
        self.drop2 = Dropout(dropout)
        if in_channels != width:
            self.proj = Conv(1, in_channels, width, 1, dtype=dtype, rng=rng)
            self.proj_bn = BatchNorm(width, dtype=dtype)
        else:
            self.proj = None
            self.proj_bn = None
        self.act_out = ReLU()

    def forward(self, x):
        h = self.drop1(ops.concat([b(x) for b in self.layer1], axis=1))
        h = self.drop2(ops.concat([b(h) for b in self.layer2], axis=1))
        skip = self.proj_bn(self.proj(x)) if self.proj is not None else x
        return self.act_out(ops.add(h, skip))

    def cost_rows(self, path, shape, conv):
        rows = []
        mids = []
        for i, b in enumerate(self.layer1):
            r, s = b.cost_rows(f"{path}.layer1.{i}", shape, conv)
            rows += r
            mids.append(s[1])
        mid = (shape[0], sum(mids)) + shape[2:]
        outs = []
        for i, b in enumerate(self.layer2):
            r, s = b.cost_rows(f"{path}.layer2.{i}", mid, conv)
            rows += r
            outs.append(s[1])
        out = (shape[0], sum(outs)) + shape[2:]
        if self.proj is not None:
            r, _ = chain_rows([("proj", self.proj), ("proj_bn", self.proj_bn)], path, shape, conv)
            rows += r
        if conv.count_elementwise_macs:
            rows.append(CostRow(f"{path}.residual", 0, 2 * int(np.prod(out))))
        return rows, out


class MSTCN(Module):
    def __init__(self, in_channels=FEATURE_WIDTH, width=MSTCN_DEFAULT_WIDTH, ghost=False,
                 dropout=0.0, dtype=np.float32, rng=None):
        super().__init__()
        self.out_channels = width
        self.blocks = []
        ch = in_channels
        for dilation in MSTCN_DILATIONS[:MSTCN_BLOCKS]:
            self.blocks.append(MSTCNBlock(ch, width, dilation, ghost, dropout, dtype, rng))
            ch = width

    def forward(self, x):
        for b in self.blocks:
            x = b(x)
        return x

    def cost_rows(self, path, shape, conv):
        return chain_rows([(f"blocks.{i}", b) for i, b in enumerate(self.blocks)], path, shape, conv)


class DCTCNUnit(Module):
    """Bottleneck then a two-layer multi-kernel causal stack; the unit
    output is appended to its input (dense connectivity)."""

    def __init__(self, in_channels, growth, bottleneck, dilation, ghost=False,
                 dropout=0.0, dtype=np.float32, rng=None):
        super().__init__()
        self.growth = growth
        gw = growth // len(DCTCN_KERNELS)
        self.bottleneck = Conv(1, in_channels, bottleneck, 1, dtype=dtype, rng=rng)
        self.bottleneck_bn = BatchNorm(bottleneck, dtype=dtype)
        self.act = ReLU()
        self.branches = [
            Sequential(_make_branch_conv(k, bottleneck, gw, dilation, ghost, dtype, rng),
                       _make_branch_conv(k, gw, gw, dilation, ghost, dtype, rng))
            for k in DCTCN_KERNELS
        ]
        self.drop = Dropout(dropout)

    def forward(self, x):
        h = self.act(self.bottleneck_bn(self.bottleneck(x)))
        h = self.drop(ops.concat([b(h) for b in self.branches], axis=1))
        return ops.concat([x, h], axis=1)

    def cost_rows(self, path, shape, conv):
        rows, s = chain_rows([("bottleneck", self.bottleneck), ("bottleneck_bn", self.bottleneck_bn),
                              ("act", self.act)], path, shape, conv)
        width = 0
        for i, b in enumerate(self.branches):
            r, bs = b.cost_rows(f"{path}.branches.{i}", s, conv)
            rows += r
            width += bs[1]
        return rows, (shape[0], shape[1] + width) + shape[2:]


class DCTCNBlock(Module):
    def __init__(self, in_channels, width, ghost=False, dropout=0.0, dtype=np.float32, rng=None):
        super().__init__()
        self.units = []
        ch = in_channels
        for j in range(DCTCN_UNITS_PER_BLOCK):
            self.units.append(DCTCNUnit(ch, DCTCN_GROWTH, DCTCN_BOTTLENECK,
                                        DCTCN_UNIT_DILATIONS[j], ghost, dropout, dtype, rng))
            ch += DCTCN_GROWTH
        self.transition = Conv(1, ch, width, 1, dtype=dtype, rng=rng)
        self.transition_bn = BatchNorm(width, dtype=dtype)
        self.act = ReLU()

    def forward(self, x):
        for u in self.units:
            x = u(x)
        return self.act(self.transition_bn(self.transition(x)))

    def cost_rows(self, path, shape, conv):
        rows, s = chain_rows([(f"units.{i}", u) for i, u in enumerate(self.units)], path, shape, conv)
        r, out = chain_rows([("transition", self.transition), ("transition_bn", self.transition_bn),
                             ("act", self.act)], path, s, conv)
        return rows + r, out


class DCTCN(Module):
    def __init__(self, in_channels=FEATURE_WIDTH, width=DCTCN_DEFAULT_WIDTH, ghost=False,
                 dropout=0.0, dtype=np.float32, rng=None):
        super().__init__()
        self.out_channels = width
        self.blocks = []
        ch = in_channels
        for _ in range(DCTCN_BLOCKS):
            self.blocks.append(DCTCNBlock(ch, width, ghost, dropout, dtype, rng))
            ch = width

    def forward(self, x):
        for b in self.blocks:
            x = b(x)
        return x

    def cost_rows(self, path, shape, conv):
        return chain_rows([(f"blocks.{i}", b) for i, b in enumerate(self.blocks)], path, shape, conv)


class PartialTCN(Module):
    """Four partial temporal blocks at constant width with increasing
    dilation."""

    def __init__(self, core="Faster", ratio=0.75, kernel=3, dilations=(1, 2, 4, 8),
                 width=FEATURE_WIDTH, mlp_expand=2.0, dropout=0.0, dtype=np.float32, rng=None):
        super().__init__()
        if len(dilations) != 4:
            raise ShapeError(f"partial tcn: expected 4 dilations, got {len(dilations)}")
        self.out_channels = width
        self.blocks = [
            PartialTemporalBlock(
                PartialBlockConfig(width, ratio=ratio, core=core, kernel=kernel, dilation=d,
                                   dropout=dropout, mlp_expand=mlp_expand),
                dtype=dtype, rng=rng)
            for d in dilations
        ]

    def forward(self, x):
        for b in self.blocks:
            x = b(x)
        return x

    def cost_rows(self, path, shape, conv):
        return chain_rows([(f"blocks.{i}", b) for i, b in enumerate(self.blocks)], path, shape, conv)


class Head(Module):
    """Mean over time followed by a linear classifier."""

    def __init__(self, in_features, num_classes, dtype=np.float32, rng=None):
        super().__init__()
        self.linear = Linear(in_features, num_classes, dtype=dtype, rng=rng)

    def forward(self, x):
        if x.shape[2] == 0:
            raise ShapeError("head: empty time axis")
        return self.linear(ops.mean(x, axis=2))

    def cost_rows(self, path, shape, conv):
        pooled = (shape[0], shape[1])
        rows = []
        if conv.count_elementwise_macs:
            rows.append(CostRow(f"{path}.time_mean", 0, int(np.prod(shape))))
        r, out = self.linear.cost_rows(f"{path}.linear", pooled, conv)
        return rows + r, out


# ---------------------------------------------------------------------
# assembled model
# ---------------------------------------------------------------------

class VSRModel(Module):
    def __init__(self, spec: ModelSpec, dropout=0.0, dtype=np.float32, seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.spec = spec
        self.frontend = Frontend(spec.frontend_variant, spec.ghost_frontend_primary_kernels,
                                 dtype=dtype, rng=rng)
        if spec.seq_model == "mstcn":
            self.seq = MSTCN(FEATURE_WIDTH, spec.hidden_width, spec.seq_ghost, dropout, dtype, rng)
        elif spec.seq_model == "dctcn":
            self.seq = DCTCN(FEATURE_WIDTH, spec.hidden_width, spec.seq_ghost, dropout, dtype, rng)
        else:
            self.seq = PartialTCN(spec.partial_core, spec.ratio, spec.kernel, spec.dilations,
                                  spec.hidden_width, spec.mlp_expand, dropout, dtype, rng)
        self.head = Head(self.seq.out_channels, spec.num_classes, dtype=dtype, rng=rng)

    def logits(self, clip):
        feats = self.frontend(clip)                      # [N, T, F]
        seq_in = ops.transpose(feats, (0, 2, 1))         # [N, F, T]
        seq_out = self.seq(seq_in)
        return self.head(seq_out)

    def forward(self, clip):
        return ops.softmax(self.logits(clip), axis=1)

    def cost_rows(self, path, shape, conv):
        rows, s = self.frontend.cost_rows(f"{path}.frontend" if path else "frontend", shape, conv)
        seq_shape = (s[0], s[2], s[1])
        r, s2 = self.seq.cost_rows(f"{path}.seq" if path else "seq", seq_shape, conv)
        rows += r
        if conv.include_head:
            r, _ = self.head.cost_rows(f"{path}.head" if path else "head", s2, conv)
            rows += r
        return rows, (shape[0], self.spec.num_classes)

    def component(self, name):
        """Sub-module behind a table component name."""
        table = {
            "full": self,
            "frontend": self.frontend,
            "frontend_trunk": self.frontend.trunk,
            "sequence": self.seq,
        }
        try:
            return table[name]
        except KeyError:
            raise ShapeError(f"component: unknown component {name!r}, expected one of {sorted(table)}") from None

    def component_input_shape(self, name):
        ins = self.spec.input_spec
        if name in ("full", "frontend"):
            return (1, ins.channels, ins.frames, ins.height, ins.width)
        if name == "frontend_trunk":
            h = _stem_spatial(ins.height)
            w = _stem_spatial(ins.width)
            return (ins.frames, RESNET_STAGE_WIDTHS[0], h, w)
        return (1, FEATURE_WIDTH, ins.frames)


def _stem_spatial(size):
    after_conv = (size + 2 * 3 - 7) // 2 + 1
    return (after_conv + 2 * 1 - 3) // 2 + 1


def build_model(spec: ModelSpec, dropout=0.0, dtype=np.float32, seed=0) -> VSRModel:
    return VSRModel(spec, dropout=dropout, dtype=dtype, seed=seed)


def build_frontend(spec: ModelSpec, dtype=np.float32, seed=0) -> Frontend:
    return Frontend(spec.frontend_variant, spec.ghost_frontend_primary_kernels,
                    dtype=dtype, rng=np.random.default_rng(seed))


def build_mstcn(spec: ModelSpec, dropout=0.0, dtype=np.float32, seed=0) -> MSTCN:
    return MSTCN(FEATURE_WIDTH, spec.hidden_width if spec.seq_model == "mstcn" else MSTCN_DEFAULT_WIDTH,
                 spec.seq_ghost, dropout, dtype, np.random.default_rng(seed))


def build_dctcn(spec: ModelSpec, dropout=0.0, dtype=np.float32, seed=0) -> DCTCN:
    return DCTCN(FEATURE_WIDTH, spec.hidden_width if spec.seq_model == "dctcn" else DCTCN_DEFAULT_WIDTH,
                 spec.seq_ghost, dropout, dtype, np.random.default_rng(seed))


def build_partial_tcn(spec: ModelSpec, dropout=0.0, dtype=np.float32, seed=0) -> PartialTCN:
    return PartialTCN(spec.partial_core, spec.ratio, spec.kernel, spec.dilations,
                      FEATURE_WIDTH, spec.mlp_expand, dropout, dtype, np.random.default_rng(seed))


def forward_vsr(model: VSRModel, clip, mode="eval"):
    """Class probabilities for a batch of clips; rows sum to 1."""
    if clip.shape[2] == 0:
        raise ShapeError("forward_vsr: empty time axis")
    model.train(mode == "train")
    return model(clip)
