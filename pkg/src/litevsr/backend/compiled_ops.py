"""Wrapper giving the compiled direct-loop kernels the same API as
`python_ops`. Raises ImportError at import time when the extension was
not built, which the backend selector treats as "fall back to numpy".
"""

import numpy as np

from . import _ckernels as ck
from .python_ops import _pad_input, out_shape

NAME = "compiled"

_FWD = {1: ck.conv1d_forward, 2: ck.conv2d_forward, 3: ck.conv3d_forward}
_BWD_IN = {1: ck.conv1d_backward_input, 2: ck.conv2d_backward_input, 3: ck.conv3d_backward_input}
_BWD_W = {1: ck.conv1d_backward_weight, 2: ck.conv2d_backward_weight, 3: ck.conv3d_backward_weight}


def _contig(a):
    return np.ascontiguousarray(a)


def conv_forward(x, w, stride, dilation, groups, pad):
    rank = w.ndim - 2
    xp = _contig(_pad_input(x, pad))
    osp = out_shape(x.shape[2:], w.shape[2:], stride, dilation, pad)
    y = np.zeros((x.shape[0], w.shape[0]) + osp, dtype=x.dtype)
    _FWD[rank](xp, _contig(w), y, *stride, *dilation, groups)
    return y


def conv_backward_input(w, gy, stride, dilation, groups, pad, x_shape):
    rank = w.ndim - 2
    sp = x_shape[2:]
    padded = tuple(sp[i] + pad[i][0] + pad[i][1] for i in range(rank))
    gxp = np.zeros(x_shape[:2] + padded, dtype=gy.dtype)
    _BWD_IN[rank](_contig(w), _contig(gy), gxp, *stride, *dilation, groups)
    crop = tuple(slice(pad[i][0], pad[i][0] + sp[i]) for i in range(rank))
    return np.ascontiguousarray(gxp[(slice(None), slice(None)) + crop])


def conv_backward_weight(x, gy, stride, dilation, groups, pad, w_shape):
    rank = len(w_shape) - 2
    xp = _contig(_pad_input(x, pad))
    gw = np.zeros(w_shape, dtype=gy.dtype)
    _BWD_W[rank](xp, _contig(gy), gw, *stride, *dilation, groups)
    return gw
