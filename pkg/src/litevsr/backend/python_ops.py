"""Pure numpy convolution kernels built on im2col and batched matmul.

These mirror the compiled direct-loop kernels in `_ckernels.pyx`; the two
are developed independently and cross-checked against each other, so any
change here must keep the contract identical: inputs are channel-first
arrays, `pad` is a per-spatial-dim (left, right) tuple, and grouped
convolution splits both channel axes into `groups` equal parts.
"""

import numpy as np

NAME = "python"


def _out_len(length, k, stride, dilation, pad_l, pad_r):
    eff = (k - 1) * dilation + 1
    return (length + pad_l + pad_r - eff) // stride + 1


def out_shape(spatial, kernel, stride, dilation, pad):
    return tuple(
        _out_len(spatial[i], kernel[i], stride[i], dilation[i], *pad[i])
        for i in range(len(kernel))
    )


def _pad_input(x, pad):
    if all(p == (0, 0) for p in pad):
        return x
    return np.pad(x, ((0, 0), (0, 0)) + tuple(pad))


def _windows(xp, kernel, stride, dilation, osp):
    """Strided view [N, C, *kernel, *osp] over the padded input."""
    n, c = xp.shape[:2]
    st = xp.strides
    shape = (n, c) + tuple(kernel) + osp
    strides = (
        st[:2]
        + tuple(st[2 + i] * dilation[i] for i in range(len(kernel)))
        + tuple(st[2 + i] * stride[i] for i in range(len(kernel)))
    )
    return np.lib.stride_tricks.as_strided(xp, shape, strides)


def _tap_slices(tap, stride, dilation, osp):
    return tuple(
        slice(tap[i] * dilation[i], tap[i] * dilation[i] + stride[i] * (osp[i] - 1) + 1, stride[i])
        for i in range(len(tap))
    )


def conv_forward(x, w, stride, dilation, groups, pad):
    n, cin = x.shape[:2]
    cout, cg = w.shape[:2]
    kernel = w.shape[2:]
    og = cout // groups
    xp = _pad_input(x, pad)
    osp = out_shape(x.shape[2:], kernel, stride, dilation, pad)
    kvol = int(np.prod(kernel))
    s = int(np.prod(osp))
    win = _windows(xp, kernel, stride, dilation, osp)
    # im2col copy happens in this reshape
    cols = win.reshape(n, groups, cg * kvol, s)
    wr = w.reshape(groups, og, cg * kvol)
    y = np.matmul(wr[None], cols)
    return np.ascontiguousarray(y.reshape((n, cout) + osp))


def conv_backward_input(w, gy, stride, dilation, groups, pad, x_shape):
    n, cin = x_shape[:2]
    sp = x_shape[2:]
    cout, cg = w.shape[:2]
    kernel = w.shape[2:]
    og = cout // groups
    osp = gy.shape[2:]
    s = int(np.prod(osp))
    padded_sp = tuple(sp[i] + pad[i][0] + pad[i][1] for i in range(len(sp)))
    gxp = np.zeros((n, cin) + padded_sp, dtype=gy.dtype)
    gyr = gy.reshape(n, groups, og, s)
    wr = w.reshape((groups, og, cg) + kernel)
    lead = (slice(None), slice(None), slice(None))
    for tap in np.ndindex(*kernel):
        wk = np.ascontiguousarray(wr[lead + tap].transpose(0, 2, 1))  # [G, Cg, Og]
        contrib = np.matmul(wk[None], gyr)  # [N, G, Cg, S]
        view = gxp[(slice(None), slice(None)) + _tap_slices(tap, stride, dilation, osp)]
        view += contrib.reshape((n, cin) + osp)
    crop = tuple(slice(pad[i][0], pad[i][0] + sp[i]) for i in range(len(sp)))
    return np.ascontiguousarray(gxp[(slice(None), slice(None)) + crop])


def conv_backward_weight(x, gy, stride, dilation, groups, pad, w_shape):
    n = x.shape[0]
    cout, cg = w_shape[:2]
    kernel = w_shape[2:]
    og = cout // groups
    osp = gy.shape[2:]
    s = int(np.prod(osp))
    xp = _pad_input(x, pad)
    gyr = np.ascontiguousarray(gy.reshape(n, groups, og, s).transpose(1, 2, 0, 3).reshape(groups, og, n * s))
    gw = np.empty(w_shape, dtype=gy.dtype)
    gwr = gw.reshape((groups, og, cg) + kernel)
    lead = (slice(None), slice(None), slice(None))
    for tap in np.ndindex(*kernel):
        xk = xp[(slice(None), slice(None)) + _tap_slices(tap, stride, dilation, osp)]
        xk = np.ascontiguousarray(xk.reshape(n, groups, cg, s).transpose(1, 0, 3, 2).reshape(groups, n * s, cg))
        gwr[lead + tap] = np.matmul(gyr, xk)  # [G, Og, Cg]
    return gw
