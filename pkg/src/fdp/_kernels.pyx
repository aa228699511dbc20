# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: typed-loop versions of fdp.kernels.fallback.

Same signatures and semantics as the fallback module; float32 and
float64 inputs are supported through a fused type.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double


def conv_out_size(size, k, stride, pad):
    span = size + 2 * pad - k
    if span < 0 or span % stride != 0:
        raise ValueError(
            f"conv geometry does not tile: size={size} k={k} stride={stride} pad={pad}"
        )
    return span // stride + 1


def im2col(x, int kh, int kw, int sh, int sw, int ph, int pw):
    x = np.ascontiguousarray(x)
    n, c, h, w = x.shape
    oh = conv_out_size(h, kh, sh, ph)
    ow = conv_out_size(w, kw, sw, pw)
    cols = np.empty((n, c * kh * kw, oh * ow), dtype=x.dtype)
    if x.dtype == np.float32:
        _im2col[float](x, cols, kh, kw, sh, sw, ph, pw, oh, ow)
    elif x.dtype == np.float64:
        _im2col[double](x, cols, kh, kw, sh, sw, ph, pw, oh, ow)
    else:
        raise TypeError(f"unsupported dtype {x.dtype}")
    return cols


cdef void _im2col(real[:, :, :, ::1] x, real[:, :, ::1] cols,
                  int kh, int kw, int sh, int sw, int ph, int pw,
                  int oh, int ow) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t b, ch, i, j, oy, ox, iy, ix, row
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ch * kh + i) * kw + j
                    for oy in range(oh):
                        iy = oy * sh + i - ph
                        if iy < 0 or iy >= h:
                            for ox in range(ow):
                                cols[b, row, oy * ow + ox] = 0
                            continue
                        for ox in range(ow):
                            ix = ox * sw + j - pw
                            if ix < 0 or ix >= w:
                                cols[b, row, oy * ow + ox] = 0
                            else:
                                cols[b, row, oy * ow + ox] = x[b, ch, iy, ix]


def col2im(cols, shape, int kh, int kw, int sh, int sw, int ph, int pw):
    cols = np.ascontiguousarray(cols)
    n, c, h, w = shape
    oh = conv_out_size(h, kh, sh, ph)
    ow = conv_out_size(w, kw, sw, pw)
    out = np.zeros((n, c, h, w), dtype=cols.dtype)
    if cols.dtype == np.float32:
        _col2im[float](cols, out, kh, kw, sh, sw, ph, pw, oh, ow)
    elif cols.dtype == np.float64:
        _col2im[double](cols, out, kh, kw, sh, sw, ph, pw, oh, ow)
    else:
        raise TypeError(f"unsupported dtype {cols.dtype}")
    return out


cdef void _col2im(real[:, :, ::1] cols, real[:, :, :, ::1] out,
                  int kh, int kw, int sh, int sw, int ph, int pw,
                  int oh, int ow) noexcept nogil:
    cdef Py_ssize_t n = out.shape[0], c = out.shape[1], h = out.shape[2], w = out.shape[3]
    cdef Py_ssize_t b, ch, i, j, oy, ox, iy, ix, row
    for b in range(n):
        for ch in range(c):
            for i in range(kh):
                for j in range(kw):
                    row = (ch * kh + i) * kw + j
                    for oy in range(oh):
                        iy = oy * sh + i - ph
                        if iy < 0 or iy >= h:
                            continue
                        for ox in range(ow):
                            ix = ox * sw + j - pw
                            if 0 <= ix < w:
                                out[b, ch, iy, ix] += cols[b, row, oy * ow + ox]


def vol2col(x, int kt, int kh, int kw, int st, int sh, int sw,
            int pt, int ph, int pw):
    x = np.ascontiguousarray(x)
    n, c, t, h, w = x.shape
    ot = conv_out_size(t, kt, st, pt)
    oh = conv_out_size(h, kh, sh, ph)
    ow = conv_out_size(w, kw, sw, pw)
    cols = np.empty((n, c * kt * kh * kw, ot * oh * ow), dtype=x.dtype)
    if x.dtype == np.float32:
        _vol2col[float](x, cols, kt, kh, kw, st, sh, sw, pt, ph, pw, ot, oh, ow)
    elif x.dtype == np.float64:
        _vol2col[double](x, cols, kt, kh, kw, st, sh, sw, pt, ph, pw, ot, oh, ow)
    else:
        raise TypeError(f"unsupported dtype {x.dtype}")
    return cols


cdef void _vol2col(real[:, :, :, :, ::1] x, real[:, :, ::1] cols,
                   int kt, int kh, int kw, int st, int sh, int sw,
                   int pt, int ph, int pw, int ot, int oh, int ow) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1]
    cdef Py_ssize_t t = x.shape[2], h = x.shape[3], w = x.shape[4]
    cdef Py_ssize_t b, ch, q, i, j, oz, oy, ox, iz, iy, ix, row, col
    cdef real v
    for b in range(n):
        for ch in range(c):
            for q in range(kt):
                for i in range(kh):
                    for j in range(kw):
                        row = ((ch * kt + q) * kh + i) * kw + j
                        for oz in range(ot):
                            iz = oz * st + q - pt
                            for oy in range(oh):
                                iy = oy * sh + i - ph
                                for ox in range(ow):
                                    ix = ox * sw + j - pw
                                    col = (oz * oh + oy) * ow + ox
                                    if (iz < 0 or iz >= t or iy < 0 or iy >= h
                                            or ix < 0 or ix >= w):
                                        v = 0
                                    else:
                                        v = x[b, ch, iz, iy, ix]
                                    cols[b, row, col] = v


def col2vol(cols, shape, int kt, int kh, int kw, int st, int sh, int sw,
            int pt, int ph, int pw):
    cols = np.ascontiguousarray(cols)
    n, c, t, h, w = shape
    ot = conv_out_size(t, kt, st, pt)
    oh = conv_out_size(h, kh, sh, ph)
    ow = conv_out_size(w, kw, sw, pw)
    out = np.zeros((n, c, t, h, w), dtype=cols.dtype)
    if cols.dtype == np.float32:
        _col2vol[float](cols, out, kt, kh, kw, st, sh, sw, pt, ph, pw, ot, oh, ow)
    elif cols.dtype == np.float64:
        _col2vol[double](cols, out, kt, kh, kw, st, sh, sw, pt, ph, pw, ot, oh, ow)
    else:
        raise TypeError(f"unsupported dtype {cols.dtype}")
    return out


cdef void _col2vol(real[:, :, ::1] cols, real[:, :, :, :, ::1] out,
                   int kt, int kh, int kw, int st, int sh, int sw,
                   int pt, int ph, int pw, int ot, int oh, int ow) noexcept nogil:
    cdef Py_ssize_t n = out.shape[0], c = out.shape[1]
    cdef Py_ssize_t t = out.shape[2], h = out.shape[3], w = out.shape[4]
    cdef Py_ssize_t b, ch, q, i, j, oz, oy, ox, iz, iy, ix, row, col
    for b in range(n):
        for ch in range(c):
            for q in range(kt):
                for i in range(kh):
                    for j in range(kw):
                        row = ((ch * kt + q) * kh + i) * kw + j
                        for oz in range(ot):
                            iz = oz * st + q - pt
                            if iz < 0 or iz >= t:
                                continue
                            for oy in range(oh):
                                iy = oy * sh + i - ph
                                if iy < 0 or iy >= h:
                                    continue
                                for ox in range(ow):
                                    ix = ox * sw + j - pw
                                    if 0 <= ix < w:
                                        col = (oz * oh + oy) * ow + ox
                                        out[b, ch, iz, iy, ix] += cols[b, row, col]


def maxpool2d(x, int k):
    x = np.ascontiguousarray(x)
    n, c, h, w = x.shape
    if h % k or w % k:
        raise ValueError(f"pool window {k} does not divide extents {h}x{w}")
    out = np.empty((n, c, h // k, w // k), dtype=x.dtype)
    idx = np.empty((n, c, h // k, w // k), dtype=np.int64)
    if x.dtype == np.float32:
        _maxpool[float](x, out, idx, k)
    elif x.dtype == np.float64:
        _maxpool[double](x, out, idx, k)
    else:
        raise TypeError(f"unsupported dtype {x.dtype}")
    return out, idx


cdef void _maxpool(real[:, :, :, ::1] x, real[:, :, :, ::1] out,
                   cnp.int64_t[:, :, :, ::1] idx, int k) noexcept nogil:
    cdef Py_ssize_t n = out.shape[0], c = out.shape[1], oh = out.shape[2], ow = out.shape[3]
    cdef Py_ssize_t b, ch, oy, ox, i, j, best
    cdef real v, m
    for b in range(n):
        for ch in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    m = x[b, ch, oy * k, ox * k]
                    best = 0
                    for i in range(k):
                        for j in range(k):
                            v = x[b, ch, oy * k + i, ox * k + j]
                            if v > m:
                                m = v
                                best = i * k + j
                    out[b, ch, oy, ox] = m
                    idx[b, ch, oy, ox] = best


def maxpool2d_backward(grad, idx, shape, int k):
    grad = np.ascontiguousarray(grad)
    idx = np.ascontiguousarray(idx)
    out = np.zeros(shape, dtype=grad.dtype)
    if grad.dtype == np.float32:
        _maxpool_bwd[float](grad, idx, out, k)
    elif grad.dtype == np.float64:
        _maxpool_bwd[double](grad, idx, out, k)
    else:
        raise TypeError(f"unsupported dtype {grad.dtype}")
    return out


cdef void _maxpool_bwd(real[:, :, :, ::1] grad, cnp.int64_t[:, :, :, ::1] idx,
                       real[:, :, :, ::1] out, int k) noexcept nogil:
    cdef Py_ssize_t n = grad.shape[0], c = grad.shape[1], oh = grad.shape[2], ow = grad.shape[3]
    cdef Py_ssize_t b, ch, oy, ox, best
    for b in range(n):
        for ch in range(c):
            for oy in range(oh):
                for ox in range(ow):
                    best = idx[b, ch, oy, ox]
                    out[b, ch, oy * k + best // k, ox * k + best % k] = grad[b, ch, oy, ox]
