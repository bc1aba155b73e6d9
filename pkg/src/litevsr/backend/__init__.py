"""Convolution backend selection.

Two interchangeable implementations exist:

* ``compiled``: Cython direct-loop kernels, fastest for depthwise and
  other small-fan-in convolutions where matmul setup dominates.
* ``python``: numpy im2col plus BLAS matmul, fastest for dense
  convolutions with large channel counts.

``LITE_VSR_BACKEND`` forces one of ``auto`` (default), ``compiled`` or
``python``. In ``auto`` mode the choice is made per call from the
descriptor's fan-in; ``benchmarks/bench_backends.py`` measures where the
crossover sits on a given machine.
"""

import os

import numpy as np

from ..errors import ConfigError
from . import python_ops

try:
    from . import compiled_ops

    HAS_COMPILED = True
except ImportError:  # extension not built
    compiled_ops = None
    HAS_COMPILED = False

_VALID = ("auto", "compiled", "python")
_mode = os.environ.get("LITE_VSR_BACKEND", "auto").lower()
if _mode not in _VALID:
    raise ConfigError(f"LITE_VSR_BACKEND: unknown backend {_mode!r}, expected one of {_VALID}")
if _mode == "compiled" and not HAS_COMPILED:
    raise ConfigError("LITE_VSR_BACKEND=compiled but the extension is not built")

# Fan-in per output element below which the direct kernels beat im2col.
_DIRECT_FANIN_CUTOFF = 16


def mode():
    return _mode


def set_mode(name):
    """Override the process-wide backend choice (mainly for tests/benchmarks)."""
    global _mode
    if name not in _VALID:
        raise ConfigError(f"backend: unknown backend {name!r}, expected one of {_VALID}")
    if name == "compiled" and not HAS_COMPILED:
        raise ConfigError("backend: compiled kernels are not built")
    _mode = name


def select(cg, kvol):
    """Pick the backend for a conv with `cg` input channels per group and
    kernel volume `kvol`."""
    if _mode == "python":
        return python_ops
    if _mode == "compiled":
        return compiled_ops
    if HAS_COMPILED and cg * kvol <= _DIRECT_FANIN_CUTOFF:
        return compiled_ops
    return python_ops


def conv_forward(x, w, stride, dilation, groups, pad):
    be = select(w.shape[1], int(np.prod(w.shape[2:])))
    return be.conv_forward(x, w, stride, dilation, groups, pad)


def conv_backward_input(w, gy, stride, dilation, groups, pad, x_shape):
    be = select(w.shape[1], int(np.prod(w.shape[2:])))
    return be.conv_backward_input(w, gy, stride, dilation, groups, pad, x_shape)


def conv_backward_weight(x, gy, stride, dilation, groups, pad, w_shape):
    be = select(w_shape[1], int(np.prod(w_shape[2:])))
    return be.conv_backward_weight(x, gy, stride, dilation, groups, pad, w_shape)
