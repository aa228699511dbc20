"""NumPy reference implementations of the hot kernels.

Shapes follow the matmul-friendly "column" convention used by the conv
ops: a column buffer holds one receptive field per output position, so a
convolution is ``weight_matrix @ cols``.
"""

import numpy as np


def conv_out_size(size, k, stride, pad):
    span = size + 2 * pad - k
    if span < 0 or span % stride != 0:
        raise ValueError(
            f"conv geometry does not tile: size={size} k={k} stride={stride} pad={pad}"
        )
    return span // stride + 1


def im2col(x, kh, kw, sh, sw, ph, pw):
    """(N, C, H, W) -> (N, C*kh*kw, OH*OW) receptive-field columns."""
    n, c, h, w = x.shape
    oh = conv_out_size(h, kh, sh, ph)
    ow = conv_out_size(w, kw, sw, pw)
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, ::sh, ::sw]  # (N, C, OH, OW, kh, kw)
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * kh * kw, oh * ow)
    return np.ascontiguousarray(cols)


def col2im(cols, shape, kh, kw, sh, sw, ph, pw):
    """Adjoint of im2col: scatter-add columns back onto (N, C, H, W)."""
    n, c, h, w = shape
    oh = conv_out_size(h, kh, sh, ph)
    ow = conv_out_size(w, kw, sw, pw)
    out = np.zeros((n, c, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    cols6 = cols.reshape(n, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + sh * oh : sh, j : j + sw * ow : sw] += cols6[:, :, i, j]
    if ph or pw:
        out = out[:, :, ph : ph + h, pw : pw + w]
    return np.ascontiguousarray(out)


def vol2col(x, kt, kh, kw, st, sh, sw, pt, ph, pw):
    """(N, C, T, H, W) -> (N, C*kt*kh*kw, OT*OH*OW) columns."""
    n, c, t, h, w = x.shape
    ot = conv_out_size(t, kt, st, pt)
    oh = conv_out_size(h, kh, sh, ph)
    ow = conv_out_size(w, kw, sw, pw)
    if pt or ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)))
    win = np.lib.stride_tricks.sliding_window_view(x, (kt, kh, kw), axis=(2, 3, 4))
    win = win[:, :, ::st, ::sh, ::sw]  # (N, C, OT, OH, OW, kt, kh, kw)
    cols = win.transpose(0, 1, 5, 6, 7, 2, 3, 4)
    return np.ascontiguousarray(cols.reshape(n, c * kt * kh * kw, ot * oh * ow))


def col2vol(cols, shape, kt, kh, kw, st, sh, sw, pt, ph, pw):
    n, c, t, h, w = shape
    ot = conv_out_size(t, kt, st, pt)
    oh = conv_out_size(h, kh, sh, ph)
    ow = conv_out_size(w, kw, sw, pw)
    out = np.zeros((n, c, t + 2 * pt, h + 2 * ph, w + 2 * pw), dtype=cols.dtype)
    cols8 = cols.reshape(n, c, kt, kh, kw, ot, oh, ow)
    for q in range(kt):
        for i in range(kh):
            for j in range(kw):
                out[
                    :,
                    :,
                    q : q + st * ot : st,
                    i : i + sh * oh : sh,
                    j : j + sw * ow : sw,
                ] += cols8[:, :, q, i, j]
    if pt or ph or pw:
        out = out[:, :, pt : pt + t, ph : ph + h, pw : pw + w]
    return np.ascontiguousarray(out)


def maxpool2d(x, k):
    """Non-overlapping k*k max pool. Returns (pooled, argmax) with argmax
    indexing the flattened window; ties resolve to the first element."""
    n, c, h, w = x.shape
    if h % k or w % k:
        raise ValueError(f"pool window {k} does not divide extents {h}x{w}")
    oh, ow = h // k, w // k
    win = x.reshape(n, c, oh, k, ow, k).transpose(0, 1, 2, 4, 3, 5)
    win = np.ascontiguousarray(win).reshape(n, c, oh, ow, k * k)
    idx = win.argmax(axis=4)
    out = np.take_along_axis(win, idx[..., None], axis=4)[..., 0]
    return np.ascontiguousarray(out), idx.astype(np.int64)


def maxpool2d_backward(grad, idx, shape, k):
    n, c, h, w = shape
    oh, ow = h // k, w // k
    gwin = np.zeros((n, c, oh, ow, k * k), dtype=grad.dtype)
    np.put_along_axis(gwin, idx[..., None], grad[..., None], axis=4)
    gx = gwin.reshape(n, c, oh, ow, k, k).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(gx).reshape(n, c, h, w)
