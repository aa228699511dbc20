"""Forward ops and their vector-Jacobian products.

Conventions:
  * feature maps are (N, C, H, W); volumes are (N, C, T, H, W)
  * conv kernels are (C_out, C_in, kh, kw); transposed-conv kernels are
    (C_in, C_out, kh, kw); linear weights are (d_in, d_out)
  * every op preserves the input dtype (float32 for training, float64
    for tight gradient checks)
"""

import numpy as np

from fdp import kernels
from fdp.numerics.tensor import Tensor, make_result


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(grad, shape):
    """Sum a broadcasted gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# ---------------------------------------------------------------- arithmetic


def add(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return make_result(out, "add", (a, b), vjp)


def sub(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), -_unbroadcast(g, b.data.shape)

    return make_result(out, "sub", (a, b), vjp)


def mul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    out = a.data * b.data

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return make_result(out, "mul", (a, b), vjp)


def neg(a):
    return make_result(-a.data, "neg", (a,), lambda g: (-g,))


def scale(a, s):
    s = float(s)
    return make_result(a.data * s, "scale", (a,), lambda g: (g * s,))


def absolute(a):
    out = np.abs(a.data)
    sign = np.sign(a.data)  # subgradient 0 at the kink

    def vjp(g):
        return (g * sign,)

    return make_result(out, "abs", (a,), vjp)


def matmul(a, b):
    """Batched matrix product; leading dims broadcast NumPy-style."""
    a = _as_tensor(a)
    b = _as_tensor(b, like=a)
    out = np.matmul(a.data, b.data)

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return make_result(out, "matmul", (a, b), vjp)


def sum_(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=False),)

    return make_result(out, "sum", (a,), vjp)


def mean_(a, axis=None, keepdims=False):
    out = a.data.mean(axis=axis, keepdims=keepdims)
    denom = a.data.size if axis is None else a.data.shape[axis]

    def vjp(g):
        g = np.asarray(g) / denom
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=False),)

    return make_result(out, "mean", (a,), vjp)


# ------------------------------------------------------------ shape plumbing


def reshape(a, shape):
    old = a.data.shape
    return make_result(
        a.data.reshape(shape), "reshape", (a,), lambda g: (g.reshape(old),)
    )


def transpose(a, axes):
    inverse = np.argsort(axes)
    return make_result(
        a.data.transpose(axes), "transpose", (a,), lambda g: (g.transpose(inverse),)
    )


def concat(tensors, axis):
    if not tensors:
        raise ValueError("concat of zero tensors")
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return make_result(out, "concat", tuple(tensors), vjp)


def slice_axis(a, axis, start, stop):
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    out = a.data[index]

    def vjp(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return make_result(np.ascontiguousarray(out), "slice", (a,), vjp)


# ---------------------------------------------------------------- nonlinear


def relu(a):
    mask = a.data > 0
    return make_result(
        np.where(mask, a.data, 0), "relu", (a,), lambda g: (g * mask,)
    )


def leaky_relu(a, slope=0.01):
    factor = np.where(a.data > 0, 1.0, slope).astype(a.data.dtype)
    return make_result(
        a.data * factor, "leaky_relu", (a,), lambda g: (g * factor,)
    )


def sigmoid(a):
    # Split by sign to avoid exp overflow on large negatives.
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return make_result(out, "sigmoid", (a,), vjp)


def softmax(a, axis=-1):
    if a.data.shape[axis] == 0:
        raise ValueError("softmax over an empty axis")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return make_result(out, "softmax", (a,), vjp)


def log_clamped(a, floor=1e-12):
    """log(max(x, floor)); gradient is zero on the clamped region."""
    clamped = np.maximum(a.data, floor)
    active = a.data > floor

    def vjp(g):
        return (g * active / clamped,)

    return make_result(np.log(clamped), "log_clamped", (a,), vjp)


def dropout(a, rate, rng, training):
    if not training or rate <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate).astype(a.data.dtype)
    factor = keep / np.asarray(1.0 - rate, dtype=a.data.dtype)

    def vjp(g):
        return (g * factor,)

    return make_result(a.data * factor, "dropout", (a,), vjp)


# -------------------------------------------------------------- convolution


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """Cross-correlation of (N,C,H,W) with (C_out,C,kh,kw)."""
    n, c, h, w = x.data.shape
    c_out, c_in, kh, kw = weight.data.shape
    if c_in != c:
        raise ValueError(f"conv2d channel mismatch: input {c}, kernel {c_in}")
    cols = kernels.im2col(x.data, kh, kw, stride, stride, padding, padding)
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    w_mat = weight.data.reshape(c_out, -1)
    out = np.matmul(w_mat, cols).reshape(n, c_out, oh, ow)
    if bias is not None:
        out = out + bias.data.reshape(1, c_out, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g):
        g_flat = g.reshape(n, c_out, oh * ow)
        gw = np.einsum("nop,nkp->ok", g_flat, cols).reshape(weight.data.shape)
        gcols = np.matmul(w_mat.T, g_flat)
        gx = kernels.col2im(
            gcols, (n, c, h, w), kh, kw, stride, stride, padding, padding
        )
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    return make_result(out, "conv2d", parents, vjp)


def conv_transpose2d(x, weight, bias=None, stride=1, padding=0):
    """Adjoint of conv2d: (N,C,H,W) with kernel (C,C_out,kh,kw) upsamples to
    H' = (H-1)*stride + kh - 2*padding."""
    n, c, h, w = x.data.shape
    c_in, c_out, kh, kw = weight.data.shape
    if c_in != c:
        raise ValueError(f"conv_transpose2d channel mismatch: input {c}, kernel {c_in}")
    oh = (h - 1) * stride + kh - 2 * padding
    ow = (w - 1) * stride + kw - 2 * padding
    if oh <= 0 or ow <= 0:
        raise ValueError("conv_transpose2d output would be empty")
    w_mat = weight.data.reshape(c, -1)  # (C, C_out*kh*kw)
    x_flat = x.data.reshape(n, c, h * w)
    cols = np.matmul(w_mat.T, x_flat)  # (N, C_out*kh*kw, H*W)
    out = kernels.col2im(
        cols, (n, c_out, oh, ow), kh, kw, stride, stride, padding, padding
    )
    if bias is not None:
        out = out + bias.data.reshape(1, c_out, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g):
        gcols = kernels.im2col(g, kh, kw, stride, stride, padding, padding)
        gx = np.matmul(w_mat, gcols).reshape(n, c, h, w)
        gw = np.einsum("ncp,nkp->ck", x_flat, gcols).reshape(weight.data.shape)
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3))

    return make_result(out, "conv_transpose2d", parents, vjp)


def conv3d(x, weight, bias=None, stride=(1, 1, 1), padding=(0, 0, 0)):
    """Cross-correlation of (N,C,T,H,W) with (C_out,C,kt,kh,kw)."""
    n, c, t, h, w = x.data.shape
    c_out, c_in, kt, kh, kw = weight.data.shape
    if c_in != c:
        raise ValueError(f"conv3d channel mismatch: input {c}, kernel {c_in}")
    st, sh, sw = stride
    pt, ph, pw = padding
    cols = kernels.vol2col(x.data, kt, kh, kw, st, sh, sw, pt, ph, pw)
    ot = (t + 2 * pt - kt) // st + 1
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w + 2 * pw - kw) // sw + 1
    w_mat = weight.data.reshape(c_out, -1)
    out = np.matmul(w_mat, cols).reshape(n, c_out, ot, oh, ow)
    if bias is not None:
        out = out + bias.data.reshape(1, c_out, 1, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g):
        g_flat = g.reshape(n, c_out, ot * oh * ow)
        gw = np.einsum("nop,nkp->ok", g_flat, cols).reshape(weight.data.shape)
        gcols = np.matmul(w_mat.T, g_flat)
        gx = kernels.col2vol(
            gcols, (n, c, t, h, w), kt, kh, kw, st, sh, sw, pt, ph, pw
        )
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2, 3, 4))

    return make_result(out, "conv3d", parents, vjp)


# ----------------------------------------------------------------- pooling


def maxpool2d(x, k):
    out, idx = kernels.maxpool2d(x.data, k)
    shape = x.data.shape

    def vjp(g):
        return (kernels.maxpool2d_backward(np.ascontiguousarray(g), idx, shape, k),)

    return make_result(out, "maxpool2d", (x,), vjp)


def global_avg_pool(x):
    n, c, h, w = x.data.shape
    out = x.data.mean(axis=(2, 3))

    def vjp(g):
        return (
            np.broadcast_to(g[:, :, None, None] / (h * w), x.data.shape).astype(
                x.data.dtype, copy=False
            ),
        )

    return make_result(out, "global_avg_pool", (x,), vjp)


# ------------------------------------------------------------ linear layers


def linear(x, weight, bias=None):
    """x (..., d_in) @ weight (d_in, d_out) + bias."""
    out = np.matmul(x.data, weight.data)
    if bias is not None:
        out = out + bias.data

    parents = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g):
        gx = np.matmul(g, weight.data.T)
        lead = x.data.reshape(-1, x.data.shape[-1])
        gw = lead.T @ g.reshape(-1, g.shape[-1])
        if bias is None:
            return gx, gw
        gb = g.reshape(-1, g.shape[-1]).sum(axis=0)
        return gx, gw, gb

    return make_result(out, "linear", parents, vjp)


def batch_norm2d(x, gamma, beta, running_mean, running_var, training,
                 momentum=0.1, eps=1e-5):
    """Per-channel batch normalization over (N, H, W).

    Train mode normalizes by batch statistics and updates the running
    arrays in place (exponential moving average, biased variance). Eval
    mode is a fixed affine map using the running statistics.
    """
    n, c, h, w = x.data.shape
    gshape = (1, c, 1, 1)
    if training:
        m = n * h * w
        if m < 2:
            raise ValueError("batch_norm2d train mode needs more than one value per channel")
        mean = x.data.mean(axis=(0, 2, 3), keepdims=True)
        var = x.data.var(axis=(0, 2, 3), keepdims=True)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean.reshape(c)
        running_var *= 1.0 - momentum
        running_var += momentum * var.reshape(c)
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mean) * inv_std
        out = gamma.data.reshape(gshape) * xhat + beta.data.reshape(gshape)

        def vjp(g):
            gg = gamma.data.reshape(gshape)
            dxhat = g * gg
            dvar = (dxhat * (x.data - mean) * -0.5 * inv_std**3).sum(
                axis=(0, 2, 3), keepdims=True
            )
            dmean = (-dxhat * inv_std).sum(axis=(0, 2, 3), keepdims=True) + dvar * (
                -2.0 * (x.data - mean)
            ).mean(axis=(0, 2, 3), keepdims=True)
            gx = dxhat * inv_std + dvar * 2.0 * (x.data - mean) / m + dmean / m
            ggamma = (g * xhat).sum(axis=(0, 2, 3))
            gbeta = g.sum(axis=(0, 2, 3))
            return gx.astype(x.data.dtype, copy=False), ggamma, gbeta

        return make_result(out, "batch_norm2d", (x, gamma, beta), vjp)

    inv_std = 1.0 / np.sqrt(running_var.reshape(gshape) + eps)
    xhat = (x.data - running_mean.reshape(gshape)) * inv_std
    out = gamma.data.reshape(gshape) * xhat + beta.data.reshape(gshape)

    def vjp(g):
        gx = g * gamma.data.reshape(gshape) * inv_std
        ggamma = (g * xhat).sum(axis=(0, 2, 3))
        gbeta = g.sum(axis=(0, 2, 3))
        return gx.astype(x.data.dtype, copy=False), ggamma, gbeta

    return make_result(out, "batch_norm2d_eval", (x, gamma, beta), vjp)
