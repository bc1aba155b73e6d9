# Direct-loop convolution kernels for 1-D, 2-D and 3-D inputs.
#
# All kernels take a pre-padded input; padding policy lives with the caller.
# Layouts: x [N, Cin, *spatial], w [Cout, Cin/groups, *kernel],
# y [N, Cout, *out_spatial], all C-contiguous.

cimport cython

ctypedef fused floating:
    float
    double


def conv1d_forward(floating[:, :, ::1] xp, floating[:, :, ::1] w,
                   floating[:, :, ::1] y, int stride, int dilation, int groups):
    cdef Py_ssize_t n_, g, o, oc, t, c, k
    cdef Py_ssize_t N = xp.shape[0], Cg = w.shape[1], K = w.shape[2]
    cdef Py_ssize_t Cout = w.shape[0], To = y.shape[2]
    cdef Py_ssize_t Og = Cout // groups
    cdef Py_ssize_t base
    cdef floating acc
    with nogil:
        for n_ in range(N):
            for g in range(groups):
                for o in range(Og):
                    oc = g * Og + o
                    for t in range(To):
                        acc = 0
                        base = t * stride
                        for c in range(Cg):
                            for k in range(K):
                                acc = acc + xp[n_, g * Cg + c, base + k * dilation] * w[oc, c, k]
                        y[n_, oc, t] = acc


def conv1d_backward_input(floating[:, :, ::1] w, floating[:, :, ::1] gy,
                          floating[:, :, ::1] gxp, int stride, int dilation, int groups):
    cdef Py_ssize_t n_, g, o, oc, t, c, k
    cdef Py_ssize_t N = gy.shape[0], Cg = w.shape[1], K = w.shape[2]
    cdef Py_ssize_t Cout = w.shape[0], To = gy.shape[2]
    cdef Py_ssize_t Og = Cout // groups
    cdef floating gv
    with nogil:
        for n_ in range(N):
            for g in range(groups):
                for o in range(Og):
                    oc = g * Og + o
                    for t in range(To):
                        gv = gy[n_, oc, t]
                        for c in range(Cg):
                            for k in range(K):
                                gxp[n_, g * Cg + c, t * stride + k * dilation] += gv * w[oc, c, k]


def conv1d_backward_weight(floating[:, :, ::1] xp, floating[:, :, ::1] gy,
                           floating[:, :, ::1] gw, int stride, int dilation, int groups):
    cdef Py_ssize_t n_, g, o, oc, t, c, k
    cdef Py_ssize_t N = xp.shape[0], Cg = gw.shape[1], K = gw.shape[2]
    cdef Py_ssize_t Cout = gw.shape[0], To = gy.shape[2]
    cdef Py_ssize_t Og = Cout // groups
    cdef floating gv
    with nogil:
        for n_ in range(N):
            for g in range(groups):
                for o in range(Og):
                    oc = g * Og + o
                    for t in range(To):
                        gv = gy[n_, oc, t]
                        for c in range(Cg):
                            for k in range(K):
                                gw[oc, c, k] += gv * xp[n_, g * Cg + c, t * stride + k * dilation]


def conv2d_forward(floating[:, :, :, ::1] xp, floating[:, :, :, ::1] w,
                   floating[:, :, :, ::1] y, int sh, int sw, int dh, int dw_,
                   int groups):
    cdef Py_ssize_t n_, g, o, oc, oy, ox, c, ky, kx
    cdef Py_ssize_t N = xp.shape[0], Cg = w.shape[1], Kh = w.shape[2], Kw = w.shape[3]
    cdef Py_ssize_t Cout = w.shape[0], Ho = y.shape[2], Wo = y.shape[3]
    cdef Py_ssize_t Og = Cout // groups
    cdef Py_ssize_t iy, ix
    cdef floating acc
    with nogil:
        for n_ in range(N):
            for g in range(groups):
                for o in range(Og):
                    oc = g * Og + o
                    for oy in range(Ho):
                        for ox in range(Wo):
                            acc = 0
                            for c in range(Cg):
                                for ky in range(Kh):
                                    iy = oy * sh + ky * dh
                                    for kx in range(Kw):
                                        ix = ox * sw + kx * dw_
                                        acc = acc + xp[n_, g * Cg + c, iy, ix] * w[oc, c, ky, kx]
                            y[n_, oc, oy, ox] = acc


def conv2d_backward_input(floating[:, :, :, ::1] w, floating[:, :, :, ::1] gy,
                          floating[:, :, :, ::1] gxp, int sh, int sw,
                          int dh, int dw_, int groups):
    cdef Py_ssize_t n_, g, o, oc, oy, ox, c, ky, kx
    cdef Py_ssize_t Cg = w.shape[1], Kh = w.shape[2], Kw = w.shape[3]
    cdef Py_ssize_t N = gy.shape[0], Cout = w.shape[0]
    cdef Py_ssize_t Ho = gy.shape[2], Wo = gy.shape[3]
    cdef Py_ssize_t Og = Cout // groups
    cdef floating gv
    with nogil:
        for n_ in range(N):
            for g in range(groups):
                for o in range(Og):
                    oc = g * Og + o
                    for oy in range(Ho):
                        for ox in range(Wo):
                            gv = gy[n_, oc, oy, ox]
                            for c in range(Cg):
                                for ky in range(Kh):
                                    for kx in range(Kw):
                                        gxp[n_, g * Cg + c, oy * sh + ky * dh, ox * sw + kx * dw_] += gv * w[oc, c, ky, kx]


def conv2d_backward_weight(floating[:, :, :, ::1] xp, floating[:, :, :, ::1] gy,
                           floating[:, :, :, ::1] gw, int sh, int sw,
                           int dh, int dw_, int groups):
    cdef Py_ssize_t n_, g, o, oc, oy, ox, c, ky, kx
    cdef Py_ssize_t N = xp.shape[0], Cg = gw.shape[1], Kh = gw.shape[2], Kw = gw.shape[3]
    cdef Py_ssize_t Cout = gw.shape[0], Ho = gy.shape[2], Wo = gy.shape[3]
    cdef Py_ssize_t Og = Cout // groups
    cdef floating gv
    with nogil:
        for n_ in range(N):
            for g in range(groups):
                for o in range(Og):
                    oc = g * Og + o
                    for oy in range(Ho):
                        for ox in range(Wo):
                            gv = gy[n_, oc, oy, ox]
                            for c in range(Cg):
                                for ky in range(Kh):
                                    for kx in range(Kw):
                                        gw[oc, c, ky, kx] += gv * xp[n_, g * Cg + c, oy * sh + ky * dh, ox * sw + kx * dw_]


def conv3d_forward(floating[:, :, :, :, ::1] xp, floating[:, :, :, :, ::1] w,
                   floating[:, :, :, :, ::1] y, int st, int sh, int sw,
                   int dt, int dh, int dw_, int groups):
    cdef Py_ssize_t n_, g, o, oc, ot, oy, ox, c, kt, ky, kx
    cdef Py_ssize_t N = xp.shape[0], Cg = w.shape[1]
    cdef Py_ssize_t Kt = w.shape[2], Kh = w.shape[3], Kw = w.shape[4]
    cdef Py_ssize_t Cout = w.shape[0], To = y.shape[2], Ho = y.shape[3], Wo = y.shape[4]
    cdef Py_ssize_t Og = Cout // groups
    cdef Py_ssize_t it, iy, ix
    cdef floating acc
    with nogil:
        for n_ in range(N):
            for g in range(groups):
                for o in range(Og):
                    oc = g * Og + o
                    for ot in range(To):
                        for oy in range(Ho):
                            for ox in range(Wo):
                                acc = 0
                                for c in range(Cg):
                                    for kt in range(Kt):
                                        it = ot * st + kt * dt
                                        for ky in range(Kh):
                                            iy = oy * sh + ky * dh
                                            for kx in range(Kw):
                                                ix = ox * sw + kx * dw_
                                                acc = acc + xp[n_, g * Cg + c, it, iy, ix] * w[oc, c, kt, ky, kx]
                                y[n_, oc, ot, oy, ox] = acc


def conv3d_backward_input(floating[:, :, :, :, ::1] w, floating[:, :, :, :, ::1] gy,
                          floating[:, :, :, :, ::1] gxp, int st, int sh, int sw,
                          int dt, int dh, int dw_, int groups):
    cdef Py_ssize_t n_, g, o, oc, ot, oy, ox, c, kt, ky, kx
    cdef Py_ssize_t Cg = w.shape[1]
    cdef Py_ssize_t Kt = w.shape[2], Kh = w.shape[3], Kw = w.shape[4]
    cdef Py_ssize_t N = gy.shape[0], Cout = w.shape[0]
    cdef Py_ssize_t To = gy.shape[2], Ho = gy.shape[3], Wo = gy.shape[4]
    cdef Py_ssize_t Og = Cout // groups
    cdef floating gv
    with nogil:
        for n_ in range(N):
            for g in range(groups):
                for o in range(Og):
                    oc = g * Og + o
                    for ot in range(To):
                        for oy in range(Ho):
                            for ox in range(Wo):
                                gv = gy[n_, oc, ot, oy, ox]
                                for c in range(Cg):
                                    for kt in range(Kt):
                                        for ky in range(Kh):
                                            for kx in range(Kw):
                                                gxp[n_, g * Cg + c, ot * st + kt * dt, oy * sh + ky * dh, ox * sw + kx * dw_] += gv * w[oc, c, kt, ky, kx]


def conv3d_backward_weight(floating[:, :, :, :, ::1] xp, floating[:, :, :, :, ::1] gy,
                           floating[:, :, :, :, ::1] gw, int st, int sh, int sw,
                           int dt, int dh, int dw_, int groups):
    cdef Py_ssize_t n_, g, o, oc, ot, oy, ox, c, kt, ky, kx
    cdef Py_ssize_t N = xp.shape[0], Cg = gw.shape[1]
    cdef Py_ssize_t Kt = gw.shape[2], Kh = gw.shape[3], Kw = gw.shape[4]
    cdef Py_ssize_t Cout = gw.shape[0]
    cdef Py_ssize_t To = gy.shape[2], Ho = gy.shape[3], Wo = gy.shape[4]
    cdef Py_ssize_t Og = Cout // groups
    cdef floating gv
    with nogil:
        for n_ in range(N):
            for g in range(groups):
                for o in range(Og):
                    oc = g * Og + o
                    for ot in range(To):
                        for oy in range(Ho):
                            for ox in range(Wo):
                                gv = gy[n_, oc, ot, oy, ox]
                                for c in range(Cg):
                                    for kt in range(Kt):
                                        for ky in range(Kh):
                                            for kx in range(Kw):
                                                gw[oc, c, kt, ky, kx] += gv * xp[n_, g * Cg + c, ot * st + kt * dt, oy * sh + ky * dh, ox * sw + kx * dw_]
