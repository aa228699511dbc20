"""Parameter-owning layers on top of fdp.numerics.

``Module`` gives recursive parameter/buffer discovery (attribute scan in
definition order, so checkpoint layout is deterministic) and a train/eval
flag used by batch norm and dropout.
"""

import numpy as np

from fdp.numerics import Tensor, ops


class Module:
    def __init__(self):
        self.training = True

    def _children(self):
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
        for name, child in self._children():
            yield from child.named_parameters(prefix + name + ".")

    def named_buffers(self, prefix=""):
        for name, value in getattr(self, "_buffers", {}).items():
            yield prefix + name, value
        for name, child in self._children():
            yield from child.named_buffers(prefix + name + ".")

    def register_buffer(self, name, array):
        if not hasattr(self, "_buffers"):
            self._buffers = {}
        self._buffers[name] = array
        return array

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def zero_weights(self):
        """Zero every parameter except batch-norm scales (identity test aid)."""
        for name, p in self.named_parameters():
            if not name.endswith(".gamma"):
                p.data[...] = 0.0

    def train(self, flag=True):
        self.training = flag
        for _, child in self._children():
            child.train(flag)
        return self

    def eval(self):
        return self.train(False)

    def param_count(self):
        return sum(p.size for p in self.parameters())

    def astype(self, dtype):
        """Cast parameters and buffers in place (float64 for grad checks)."""
        for _, p in self.named_parameters():
            p.data = p.data.astype(dtype)
        for owner in self._modules_with_buffers():
            for name in owner._buffers:
                owner._buffers[name] = owner._buffers[name].astype(dtype)
                if hasattr(owner, name):
                    setattr(owner, name, owner._buffers[name])
        return self

    def _modules_with_buffers(self):
        if getattr(self, "_buffers", None):
            yield self
        for _, child in self._children():
            yield from child._modules_with_buffers()


def he_normal(rng, shape, fan_in, dtype=np.float32):
    return Tensor(
        (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype),
        requires_grad=True,
    )


def xavier_uniform(rng, shape, fan_in, fan_out, dtype=np.float32):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(
        rng.uniform(-limit, limit, size=shape).astype(dtype), requires_grad=True
    )


def zeros_param(shape, dtype=np.float32):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


class Conv2d(Module):
    def __init__(self, rng, in_ch, out_ch, k, stride=1, padding=0, bias=True):
        super().__init__()
        self.stride = stride
        self.padding = padding
        self.weight = he_normal(rng, (out_ch, in_ch, k, k), fan_in=in_ch * k * k)
        self.bias = zeros_param(out_ch) if bias else None

    def forward(self, x):
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2d(Module):
    def __init__(self, rng, in_ch, out_ch, k, stride, bias=True):
        super().__init__()
        self.stride = stride
        self.weight = he_normal(rng, (in_ch, out_ch, k, k), fan_in=in_ch * k * k)
        self.bias = zeros_param(out_ch) if bias else None

    def forward(self, x):
        return ops.conv_transpose2d(x, self.weight, self.bias, self.stride)


class Conv3d(Module):
    def __init__(self, rng, in_ch, out_ch, kt, k, padding=(0, 0, 0), bias=True):
        super().__init__()
        self.padding = padding
        self.weight = he_normal(
            rng, (out_ch, in_ch, kt, k, k), fan_in=in_ch * kt * k * k
        )
        self.bias = zeros_param(out_ch) if bias else None

    def forward(self, x):
        return ops.conv3d(x, self.weight, self.bias, padding=self.padding)


class Linear(Module):
    def __init__(self, rng, d_in, d_out, bias=True):
        super().__init__()
        self.weight = xavier_uniform(rng, (d_in, d_out), d_in, d_out)
        self.bias = zeros_param(d_out) if bias else None

    def forward(self, x):
        return ops.linear(x, self.weight, self.bias)


class BatchNorm2d(Module):
    def __init__(self, channels, eps=1e-5, momentum=0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels, dtype=np.float32), requires_grad=True)
        self.beta = zeros_param(channels)
        self.running_mean = self.register_buffer(
            "running_mean", np.zeros(channels, dtype=np.float32)
        )
        self.running_var = self.register_buffer(
            "running_var", np.ones(channels, dtype=np.float32)
        )

    def forward(self, x):
        return ops.batch_norm2d(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            self.training,
            self.momentum,
            self.eps,
        )


class Dropout(Module):
    """Inverted dropout; `rng` is shared model-wide so runs are replayable."""

    def __init__(self, rate, rng):
        super().__init__()
        self.rate = rate
        self.rng = rng

    def forward(self, x):
        return ops.dropout(x, self.rate, self.rng, self.training)
