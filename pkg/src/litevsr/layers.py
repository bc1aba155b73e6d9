"""Module system and leaf layers.

A Module discovers parameters and children by scanning its attributes in
insertion order, so registries and checkpoints are deterministic. Every
layer implements two analytic accessors next to its forward pass:
`own_param_count` (closed-form trainable-element count) and `cost_rows`
(parameter and MAC rows under a CountingConvention, driven by shape
propagation). Cost accounting never inspects the allocated arrays; tests
compare it against a registry walk as an independent oracle.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .costmodel import CostRow, CountingConvention
from .errors import ShapeError
from .ops import ConvDescriptor
from .tensor import Tensor


def _default_rng(rng):
    return rng if rng is not None else np.random.default_rng(0)


_FAST_INIT = False


class fast_init:
    """Skip weight sampling while building models that are only counted,
    never evaluated (cost analysis of multi-row tables)."""

    def __enter__(self):
        global _FAST_INIT
        self._prev = _FAST_INIT
        _FAST_INIT = True
        return self

    def __exit__(self, *exc):
        global _FAST_INIT
        _FAST_INIT = self._prev
        return False


def _init_normal(rng, std, shape):
    if _FAST_INIT:
        return np.empty(shape, dtype=np.float64)
    return rng.normal(0.0, std, shape)


class Module:
    def __init__(self):
        self.training = True

    # -- tree walking ---------------------------------------------------
    def named_children(self):
        seen = set()
        for name, value in vars(self).items():
            if isinstance(value, Module):
                if id(value) not in seen:
                    seen.add(id(value))
                    yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module) and id(item) not in seen:
                        seen.add(id(item))
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield (f"{prefix}{name}", value)
        for name, child in self.named_children():
            yield from child.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def registry(self):
        """Name -> parameter mapping; raises if a name or tensor repeats."""
        reg = {}
        seen = set()
        for name, t in self.named_parameters():
            if name in reg:
                raise ShapeError(f"registry: duplicate parameter name {name}")
            if id(t) in seen:
                raise ShapeError(f"registry: tensor registered twice, second name {name}")
            seen.add(id(t))
            reg[name] = t
        return reg

    def train(self, flag=True):
        self.training = flag
        for _, child in self.named_children():
            child.train(flag)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def reseed_dropout(self, seed):
        idx = 0
        for _, child in self.named_modules():
            if isinstance(child, Dropout):
                child._rng = np.random.default_rng((int(seed), idx))
                idx += 1

    def named_modules(self, prefix=""):
        yield prefix.rstrip("."), self
        for name, child in self.named_children():
            yield from child.named_modules(prefix=f"{prefix}{name}.")

    # -- analytic cost protocol ------------------------------------------
    def own_param_count(self, conv: CountingConvention) -> int:
        return 0

    def param_count(self, conv: CountingConvention = None) -> int:
        conv = conv or CountingConvention()
        total = self.own_param_count(conv)
        for _, child in self.named_children():
            total += child.param_count(conv)
        return total

    def cost_rows(self, path, shape, conv):
        raise NotImplementedError(f"{type(self).__name__}.cost_rows")

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def chain_rows(children, path, shape, conv):
    rows = []
    for name, child in children:
        r, shape = child.cost_rows(f"{path}.{name}" if path else name, shape, conv)
        rows.extend(r)
    return rows, shape


class Sequential(Module):
    def __init__(self, *layers):
        super().__init__()
        self.layers = list(layers[0]) if len(layers) == 1 and isinstance(layers[0], (list, tuple)) else list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x

    def cost_rows(self, path, shape, conv):
        return chain_rows([(f"layers.{i}", m) for i, m in enumerate(self.layers)], path, shape, conv)


class Identity(Module):
    def forward(self, x):
        return x

    def cost_rows(self, path, shape, conv):
        return [], shape


class Conv(Module):
    """Convolution layer over 1, 2 or 3 spatial dims."""

    def __init__(self, rank, in_channels, out_channels, kernel, stride=1, dilation=1,
                 groups=1, padding="symmetric", bias=False, dtype=np.float32, rng=None):
        super().__init__()
        kernel = (kernel,) * rank if isinstance(kernel, int) else tuple(kernel)
        stride = (stride,) * rank if isinstance(stride, int) else tuple(stride)
        dilation = (dilation,) * rank if isinstance(dilation, int) else tuple(dilation)
        self.desc = ConvDescriptor(kernel, in_channels, out_channels, stride, dilation, groups, padding)
        rng = _default_rng(rng)
        fan_in = (in_channels // groups) * int(np.prod(kernel))
        std = np.sqrt(2.0 / fan_in)
        self.weight = Tensor(_init_normal(rng, std, self.desc.weight_shape()), requires_grad=True, dtype=dtype)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True, dtype=dtype) if bias else None

    def forward(self, x):
        return ops.conv(x, self.weight, self.desc, self.bias)

    def own_param_count(self, conv):
        d = self.desc
        n = d.out_channels * (d.in_channels // d.groups) * int(np.prod(d.kernel_dims))
        if self.bias is not None:
            n += d.out_channels
        return n

    def _counted_out(self, shape, conv):
        d = self.desc
        osp = d.out_spatial(shape[2:])
        counted = osp
        if conv.count_padding_overhead and d.padding_mode == "causal-left":
            k, s, dil = d.kernel_dims[0], d.stride[0], d.dilation[0]
            counted = ((shape[2] + (k - 1) * dil - 1) // s + 1,)
        return osp, counted

    def cost_rows(self, path, shape, conv):
        d = self.desc
        if shape[1] != d.in_channels:
            raise ShapeError(f"{path}: expected {d.in_channels} channels, got shape {shape}")
        osp, counted = self._counted_out(shape, conv)
        out_elems = shape[0] * d.out_channels * int(np.prod(counted))
        macs = out_elems * (d.in_channels // d.groups) * int(np.prod(d.kernel_dims))
        if conv.macs_count_bias and self.bias is not None:
            macs += out_elems
        return [CostRow(path, self.own_param_count(conv), macs)], (shape[0], d.out_channels) + osp


class BatchNorm(Module):
    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels), requires_grad=True, dtype=dtype)
        self.beta = Tensor(np.zeros(channels), requires_grad=True, dtype=dtype)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def forward(self, x):
        return ops.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                              self.training, self.momentum, self.eps)

    def own_param_count(self, conv):
        return 2 * self.channels if conv.count_bn_affine_params else 0

    def cost_rows(self, path, shape, conv):
        macs = 2 * int(np.prod(shape)) if conv.count_elementwise_macs else 0
        return [CostRow(path, self.own_param_count(conv), macs)], shape


class _Elementwise(Module):
    def cost_rows(self, path, shape, conv):
        macs = int(np.prod(shape)) if conv.count_elementwise_macs else 0
        return ([CostRow(path, 0, macs)] if macs else []), shape


class ReLU(_Elementwise):
    def forward(self, x):
        return ops.relu(x)


class Sigmoid(_Elementwise):
    def forward(self, x):
        return ops.sigmoid(x)


ACTIVATIONS = {"relu": ReLU, "sigmoid": Sigmoid, "identity": Identity}


def make_activation(name):
    try:
        return ACTIVATIONS[name]()
    except KeyError:
        raise ShapeError(f"activation: unknown nonlinearity {name!r}") from None


class Dropout(Module):
    """Inverted dropout; active only in train mode."""

    def __init__(self, p):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ShapeError(f"dropout: rate must be in [0, 1), got {p}")
        self.p = p
        self._rng = None

    def forward(self, x):
        if not self.training or self.p == 0.0:
            return x
        if self._rng is None:
            self._rng = np.random.default_rng(12345)
        draw_dtype = x.dtype if x.dtype in (np.float32, np.float64) else np.float64
        keep = (self._rng.random(x.shape, dtype=draw_dtype) >= self.p).astype(x.dtype.type)
        mask = keep / np.asarray(1.0 - self.p, dtype=x.dtype)
        return ops.mul(x, Tensor(mask, dtype=x.dtype))

    def cost_rows(self, path, shape, conv):
        return [], shape


class Linear(Module):
    def __init__(self, in_features, out_features, bias=True, dtype=np.float32, rng=None):
        super().__init__()
        rng = _default_rng(rng)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(_init_normal(rng, np.sqrt(1.0 / in_features), (in_features, out_features)),
                             requires_grad=True, dtype=dtype)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True, dtype=dtype) if bias else None

    def forward(self, x):
        return ops.linear(x, self.weight, self.bias)

    def own_param_count(self, conv):
        n = self.in_features * self.out_features
        if self.bias is not None:
            n += self.out_features
        return n

    def cost_rows(self, path, shape, conv):
        macs = shape[0] * self.in_features * self.out_features
        if conv.macs_count_bias and self.bias is not None:
            macs += shape[0] * self.out_features
        return [CostRow(path, self.own_param_count(conv), macs)], (shape[0], self.out_features)


class MaxPool2d(Module):
    def __init__(self, window, stride, padding=0):
        super().__init__()
        self.window = (window, window) if isinstance(window, int) else tuple(window)
        self.stride = (stride, stride) if isinstance(stride, int) else tuple(stride)
        self.padding = padding

    def forward(self, x):
        return ops.max_pool2d(x, self.window, self.stride, self.padding)

    def _out(self, shape):
        ph = self.padding if isinstance(self.padding, int) else self.padding[0]
        pw = self.padding if isinstance(self.padding, int) else self.padding[1]
        h = (shape[2] + 2 * ph - self.window[0]) // self.stride[0] + 1
        w = (shape[3] + 2 * pw - self.window[1]) // self.stride[1] + 1
        return shape[:2] + (h, w)

    def cost_rows(self, path, shape, conv):
        out = self._out(shape)
        macs = int(np.prod(out)) * self.window[0] * self.window[1] if conv.count_elementwise_macs else 0
        return ([CostRow(path, 0, macs)] if macs else []), out


class AvgPool(Module):
    def __init__(self, window, stride=None):
        super().__init__()
        self.window = window
        self.stride = stride if stride is not None else window

    def forward(self, x):
        return ops.avg_pool(x, self.window, self.stride)

    def cost_rows(self, path, shape, conv):
        rank = len(shape) - 2
        win = (self.window,) * rank if isinstance(self.window, int) else tuple(self.window)
        st = (self.stride,) * rank if isinstance(self.stride, int) else tuple(self.stride)
        osp = tuple((shape[2 + i] - win[i]) // st[i] + 1 for i in range(rank))
        out = shape[:2] + osp
        macs = int(np.prod(out)) * int(np.prod(win)) if conv.count_elementwise_macs else 0
        return ([CostRow(path, 0, macs)] if macs else []), out


class GlobalAvgPool2d(Module):
    def forward(self, x):
        return ops.global_avg_pool_spatial(x)

    def cost_rows(self, path, shape, conv):
        macs = int(np.prod(shape)) if conv.count_elementwise_macs else 0
        return ([CostRow(path, 0, macs)] if macs else []), shape[:2]
