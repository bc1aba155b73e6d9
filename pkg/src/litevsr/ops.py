"""Differentiable operations over Tensors.

Heavy kernels (convolution) dispatch to the selected backend; everything
else is numpy with hand-derived gradients. Reduction-style ops follow the
convention that the backward closure receives the upstream gradient array
and pushes contributions into each parent via `accumulate_grad`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import NumericError, ShapeError
from .tensor import Tensor, as_tensor, make_op


def _wants(t: Tensor) -> bool:
    return t.requires_grad or t._backward is not None or bool(t._parents)


def _unbroadcast(g, shape):
    """Sum `g` down to `shape`, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------

def add(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data + b.data

    def bwd(g):
        if _wants(a):
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if _wants(b):
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return make_op(out, (a, b), bwd)


def sub(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data - b.data

    def bwd(g):
        if _wants(a):
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if _wants(b):
            b.accumulate_grad(_unbroadcast(-g, b.shape))

    return make_op(out, (a, b), bwd)


def mul(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data * b.data

    def bwd(g):
        if _wants(a):
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if _wants(b):
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return make_op(out, (a, b), bwd)


def div(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data / b.data

    def bwd(g):
        if _wants(a):
            a.accumulate_grad(_unbroadcast(g / b.data, a.shape))
        if _wants(b):
            b.accumulate_grad(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return make_op(out, (a, b), bwd)


def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul: expected 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def bwd(g):
        if _wants(a):
            a.accumulate_grad(g @ b.data.T)
        if _wants(b):
            b.accumulate_grad(a.data.T @ g)

    return make_op(out, (a, b), bwd)


def sum_(x, axis=None, keepdims=False):
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if not _wants(x):
            return
        if axis is None:
            x.accumulate_grad(np.broadcast_to(g, x.shape).copy())
            return
        gk = g if keepdims else np.expand_dims(g, axis)
        x.accumulate_grad(np.broadcast_to(gk, x.shape).copy())

    return make_op(np.asarray(out), (x,), bwd)


def mean(x, axis=None, keepdims=False):
    if axis is None:
        n = x.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([x.shape[a] for a in axes]))
    s = sum_(x, axis, keepdims)
    return mul(s, 1.0 / n)


def reshape(x, shape):
    out = x.data.reshape(shape)

    def bwd(g):
        if _wants(x):
            x.accumulate_grad(g.reshape(x.shape))

    return make_op(out, (x,), bwd)


def transpose(x, axes):
    axes = tuple(axes)
    out = x.data.transpose(axes)
    inv = tuple(np.argsort(axes))

    def bwd(g):
        if _wants(x):
            x.accumulate_grad(g.transpose(inv))

    return make_op(out, (x,), bwd)


def getitem(x, idx):
    out = x.data[idx]

    def bwd(g):
        if _wants(x):
            gx = np.zeros_like(x.data)
            gx[idx] = g
            x.accumulate_grad(gx)

    return make_op(out, (x,), bwd)


def concat(tensors, axis=1):
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if _wants(t):
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t.accumulate_grad(g[tuple(sl)])

    return make_op(out, tuple(tensors), bwd)


# ---------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------

def relu(x):
    out = np.maximum(x.data, 0)

    def bwd(g):
        if _wants(x):
            x.accumulate_grad(g * (x.data > 0))

    return make_op(out, (x,), bwd)


def sigmoid(x):
    d = x.data
    out = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    # keep the contract that outputs live in the open interval
    eps = np.finfo(d.dtype).eps
    out = np.clip(out, eps, 1.0 - eps).astype(d.dtype)

    def bwd(g):
        if _wants(x):
            x.accumulate_grad(g * out * (1.0 - out))

    return make_op(out, (x,), bwd)


def softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        if _wants(x):
            dot = (g * out).sum(axis=axis, keepdims=True)
            x.accumulate_grad(out * (g - dot))

    return make_op(out, (x,), bwd)


def log_softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    sm = np.exp(out)

    def bwd(g):
        if _wants(x):
            x.accumulate_grad(g - sm * g.sum(axis=axis, keepdims=True))

    return make_op(out, (x,), bwd)


# ---------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------

PADDING_MODES = ("symmetric", "causal-left")


def _as_dims(value, rank, name):
    if isinstance(value, int):
        value = (value,) * rank
    value = tuple(int(v) for v in value)
    if len(value) != rank:
        raise ShapeError(f"{name}: expected {rank} entries, got {value}")
    if any(v < 1 for v in value):
        raise ShapeError(f"{name}: entries must be positive, got {value}")
    return value


@dataclass(frozen=True)
class ConvDescriptor:
    """Geometry of a cross-correlation: kernel, channels, stride, dilation,
    channel groups and padding policy."""

    kernel_dims: tuple
    in_channels: int
    out_channels: int
    stride: tuple = None
    dilation: tuple = None
    groups: int = 1
    padding_mode: str = "symmetric"

    def __post_init__(self):
        rank = len(tuple(self.kernel_dims)) if not isinstance(self.kernel_dims, int) else 1
        object.__setattr__(self, "kernel_dims", _as_dims(self.kernel_dims, rank, "kernel_dims"))
        rank = len(self.kernel_dims)
        if rank not in (1, 2, 3):
            raise ShapeError(f"kernel_dims: rank must be 1, 2 or 3, got {rank}")
        object.__setattr__(self, "stride", _as_dims(self.stride or 1, rank, "stride"))
        object.__setattr__(self, "dilation", _as_dims(self.dilation or 1, rank, "dilation"))
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError("channel counts must be positive")
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ShapeError(
                f"channels ({self.in_channels}->{self.out_channels}) must divide groups={self.groups}"
            )
        if self.padding_mode not in PADDING_MODES:
            raise ShapeError(f"padding_mode: unknown mode {self.padding_mode!r}")
        if self.padding_mode == "causal-left" and rank != 1:
            raise ShapeError("causal-left padding is only legal for 1-D kernels")

    @property
    def rank(self):
        return len(self.kernel_dims)

    def padding(self):
        pads = []
        for k, d in zip(self.kernel_dims, self.dilation):
            total = (k - 1) * d
            if self.padding_mode == "causal-left":
                pads.append((total, 0))
            else:
                pads.append((total // 2, total - total // 2))
        return tuple(pads)

    def weight_shape(self):
        return (self.out_channels, self.in_channels // self.groups) + self.kernel_dims

    def out_spatial(self, spatial):
        return backend.python_ops.out_shape(spatial, self.kernel_dims, self.stride, self.dilation, self.padding())


def conv(x, weight, desc: ConvDescriptor, bias=None):
    if x.ndim != desc.rank + 2:
        raise ShapeError(f"conv: input rank {x.ndim} does not match {desc.rank}-D descriptor")
    if x.shape[1] != desc.in_channels:
        raise ShapeError(f"conv: input has {x.shape[1]} channels, descriptor expects {desc.in_channels}")
    if weight.shape != desc.weight_shape():
        raise ShapeError(f"conv: weight shape {weight.shape} does not match descriptor {desc.weight_shape()}")
    if any(s == 0 for s in x.shape[2:]):
        raise ShapeError(f"conv: zero-size spatial dim in input shape {x.shape}")
    osp = desc.out_spatial(x.shape[2:])
    if any(s < 1 for s in osp):
        raise ShapeError(f"conv: input spatial {x.shape[2:]} too small for kernel {desc.kernel_dims}")

    pad = desc.padding()
    y = backend.conv_forward(x.data, weight.data, desc.stride, desc.dilation, desc.groups, pad)

    def bwd(g):
        if _wants(x):
            x.accumulate_grad(
                backend.conv_backward_input(weight.data, g, desc.stride, desc.dilation, desc.groups, pad, x.shape)
            )
        if _wants(weight):
            weight.accumulate_grad(
                backend.conv_backward_weight(x.data, g, desc.stride, desc.dilation, desc.groups, pad, weight.shape)
            )

    out = make_op(y, (x, weight), bwd)
    if bias is not None:
        if bias.shape != (desc.out_channels,):
            raise ShapeError(f"conv: bias shape {bias.shape} != ({desc.out_channels},)")
        out = add(out, reshape(bias, (1, desc.out_channels) + (1,) * desc.rank))
    return out


# ---------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------

def batch_norm(x, gamma, beta, running_mean, running_var, training, momentum=0.1, eps=1e-5):
    """Channel-wise batch normalization over axis 1.

    Train mode normalizes with batch statistics and updates the running
    buffers in place (running variance uses the unbiased estimate); eval
    mode normalizes with the running buffers.
    """
    c = x.shape[1]
    if gamma.shape != (c,) or running_mean.shape != (c,):
        raise ShapeError(f"batch_norm: state for {gamma.shape[0]} channels, input has {c}")
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, c) + (1,) * (x.ndim - 2)

    if training:
        m = x.size // c
        if m < 2:
            raise NumericError("batch_norm: train mode needs at least 2 values per channel")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * (m / (m - 1.0))
    else:
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)

    ivar = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(bshape)) * ivar.reshape(bshape)
    out = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)

    def bwd(g):
        if _wants(beta):
            beta.accumulate_grad(g.sum(axis=axes))
        if _wants(gamma):
            gamma.accumulate_grad((g * xhat).sum(axis=axes))
        if _wants(x):
            dxhat = g * gamma.data.reshape(bshape)
            if training:
                m = x.size // c
                t1 = dxhat - dxhat.mean(axis=axes, keepdims=True)
                t2 = xhat * (dxhat * xhat).mean(axis=axes, keepdims=True)
                x.accumulate_grad(ivar.reshape(bshape) * (t1 - t2))
            else:
                x.accumulate_grad(ivar.reshape(bshape) * dxhat)

    return make_op(out, (x, gamma, beta), bwd)


# ---------------------------------------------------------------------
# pooling and resampling
# ---------------------------------------------------------------------

def avg_pool(x, window, stride=None):
    rank = x.ndim - 2
    window = _as_dims(window, rank, "window")
    stride = _as_dims(stride if stride is not None else window, rank, "stride")
    sp = x.shape[2:]
    if any(window[i] > sp[i] for i in range(rank)):
        raise ShapeError(f"avg_pool: window {window} exceeds spatial dims {sp}")
    osp = tuple((sp[i] - window[i]) // stride[i] + 1 for i in range(rank))
    st = x.data.strides
    shape = x.shape[:2] + window + osp
    strides = st[:2] + st[2:] + tuple(st[2 + i] * stride[i] for i in range(rank))
    win = np.lib.stride_tricks.as_strided(x.data, shape, strides)
    wvol = int(np.prod(window))
    out = win.mean(axis=tuple(range(2, 2 + rank)))

    def bwd(g):
        if not _wants(x):
            return
        gx = np.zeros_like(x.data)
        gshare = g / wvol
        for tap in np.ndindex(*window):
            sl = tuple(
                slice(tap[i], tap[i] + stride[i] * (osp[i] - 1) + 1, stride[i]) for i in range(rank)
            )
            gx[(slice(None), slice(None)) + sl] += gshare
        x.accumulate_grad(gx)

    return make_op(np.ascontiguousarray(out), (x,), bwd)


def max_pool2d(x, window, stride, padding=0):
    n, c, h, w = x.shape
    kh, kw = _as_dims(window, 2, "window")
    sh, sw = _as_dims(stride, 2, "stride")
    ph, pw = (padding, padding) if isinstance(padding, int) else padding
    neg = np.finfo(x.dtype).min
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=neg)
    hp, wp = xp.shape[2:]
    oh = (hp - kh) // sh + 1
    ow = (wp - kw) // sw + 1
    st = xp.strides
    win = np.lib.stride_tricks.as_strided(
        xp, (n, c, oh, ow, kh, kw), st[:2] + (st[2] * sh, st[3] * sw, st[2], st[3])
    )
    flat = win.reshape(n, c, oh, ow, kh * kw)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def bwd(g):
        if not _wants(x):
            return
        gxp = np.zeros_like(xp)
        ky, kx = np.unravel_index(arg, (kh, kw))
        oy = np.arange(oh)[None, None, :, None]
        ox = np.arange(ow)[None, None, None, :]
        iy = oy * sh + ky
        ix = ox * sw + kx
        nn = np.arange(n)[:, None, None, None]
        cc = np.arange(c)[None, :, None, None]
        np.add.at(gxp, (nn, cc, iy, ix), g)
        x.accumulate_grad(gxp[:, :, ph:ph + h, pw:pw + w])

    return make_op(np.ascontiguousarray(out), (x,), bwd)


def global_avg_pool_spatial(x):
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool_spatial: expected [N,C,H,W], got {x.shape}")
    return mean(x, axis=(2, 3))


def upsample_nearest(x, target_spatial):
    rank = x.ndim - 2
    target = _as_dims(target_spatial, rank, "target_spatial")
    sp = x.shape[2:]
    if any(target[i] < sp[i] for i in range(rank)):
        raise ShapeError(f"upsample_nearest: target {target} smaller than input {sp}")
    idx = [(np.arange(target[i]) * sp[i]) // target[i] for i in range(rank)]
    grids = np.ix_(*idx)
    sl = (slice(None), slice(None)) + grids
    out = x.data[sl]

    def bwd(g):
        if not _wants(x):
            return
        gx = np.zeros_like(x.data)
        np.add.at(gx, sl, g)
        x.accumulate_grad(gx)

    return make_op(np.ascontiguousarray(out), (x,), bwd)


# ---------------------------------------------------------------------
# channel plumbing
# ---------------------------------------------------------------------

def split_channels(x, ratio):
    """Partition channels; the first part gets floor(ratio*C) of them.

    ratio == 1.0 keeps everything in the first part and returns None for
    the second (zero-channel tensors are not representable).
    """
    if not 0.0 < ratio <= 1.0:
        raise ShapeError(f"split_channels: ratio must be in (0, 1], got {ratio}")
    c = x.shape[1]
    first = int(np.floor(ratio * c))
    if ratio == 1.0 or first == c:
        if ratio < 1.0:
            raise ShapeError(f"split_channels: ratio {ratio} leaves an empty second part for C={c}")
        return x, None
    if first == 0:
        raise ShapeError(f"split_channels: ratio {ratio} gives an empty first part for C={c}")
    lead = (slice(None),)
    a = getitem(x, lead + (slice(0, first),))
    b = getitem(x, lead + (slice(first, c),))
    return a, b


def concat_channels(a, b):
    if b is None:
        return a
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(f"concat_channels: incompatible shapes {a.shape} and {b.shape}")
    return concat([a, b], axis=1)


def channel_shuffle(x, groups):
    c = x.shape[1]
    if c % groups:
        raise ShapeError(f"channel_shuffle: C={c} not divisible by groups={groups}")
    idx = np.arange(c).reshape(groups, c // groups).T.reshape(-1)
    out = x.data[:, idx]

    def bwd(g):
        if _wants(x):
            gx = np.empty_like(x.data)
            gx[:, idx] = g
            x.accumulate_grad(gx)

    return make_op(np.ascontiguousarray(out), (x,), bwd)


# ---------------------------------------------------------------------
# classification head pieces
# ---------------------------------------------------------------------

def linear(x, weight, bias=None):
    if x.ndim != 2:
        raise ShapeError(f"linear: expected [N,F] input, got {x.shape}")
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(f"linear: input features {x.shape[1]} != weight rows {weight.shape[0]}")
    out = matmul(x, weight)
    if bias is not None:
        if bias.shape != (weight.shape[1],):
            raise ShapeError(f"linear: bias shape {bias.shape} != ({weight.shape[1]},)")
        out = add(out, reshape(bias, (1, weight.shape[1])))
    return out


def cross_entropy(logits, targets):
    """Mean negative log-likelihood under softmax.

    `targets` is either an int class array [N] or a (possibly soft) label
    matrix [N, K]; soft rows must sum to 1.
    """
    n, k = logits.shape
    t = np.asarray(targets)
    if t.ndim == 1:
        if t.shape[0] != n:
            raise ShapeError(f"cross_entropy: {t.shape[0]} labels for {n} rows")
        onehot = np.zeros((n, k), dtype=logits.dtype)
        onehot[np.arange(n), t.astype(np.int64)] = 1.0
        t = onehot
    elif t.shape != (n, k):
        raise ShapeError(f"cross_entropy: target shape {t.shape} != logits shape {logits.shape}")
    t = t.astype(logits.dtype, copy=False)
    logp = log_softmax(logits, axis=1)
    return mul(sum_(mul(logp, Tensor(t, dtype=logits.dtype))), -1.0 / n)


# re-export for descriptor helpers
python_ops = backend.python_ops
