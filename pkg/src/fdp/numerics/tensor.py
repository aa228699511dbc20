"""Tensors with reverse-mode automatic differentiation.

A ``Tensor`` wraps a NumPy array. Every differentiable op attaches an
``OpNode`` recording its parent tensors and a closure that maps the
output gradient to parent gradients. Node creation order is a valid
topological order of the (acyclic) graph, so :func:`backward` simply
walks recorded nodes from the loss in reverse creation order.

Gradients accumulate additively into ``Tensor.grad`` for every tensor
with ``requires_grad=True``; call :meth:`Tensor.zero_grad` (or use
:func:`gradients`) between passes.
"""

import itertools

import numpy as np

_grad_enabled = True
_node_counter = itertools.count()


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled():
    return _grad_enabled


class OpNode:
    """One recorded op: parent tensors plus the vector-Jacobian closure."""

    __slots__ = ("name", "parents", "vjp", "seq")

    def __init__(self, name, parents, vjp):
        self.name = name
        self.parents = parents
        self.vjp = vjp
        self.seq = next(_node_counter)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "node")

    def __init__(self, data, requires_grad=False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # Thin operator sugar; the full op set lives in fdp.numerics.ops.
    def __add__(self, other):
        from fdp.numerics import ops

        return ops.add(self, other)

    def __sub__(self, other):
        from fdp.numerics import ops

        return ops.sub(self, other)

    def __mul__(self, other):
        from fdp.numerics import ops

        return ops.mul(self, other)

    def __matmul__(self, other):
        from fdp.numerics import ops

        return ops.matmul(self, other)

    def reshape(self, *shape):
        from fdp.numerics import ops

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)


def tensor(data, requires_grad=False, dtype=None):
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def make_result(data, name, parents, vjp):
    """Wrap op output; record a node only when recording is useful."""
    out = Tensor(data)
    if _grad_enabled and any(
        isinstance(p, Tensor) and (p.requires_grad or p.node is not None)
        for p in parents
    ):
        out.requires_grad = True
        out.node = OpNode(name, tuple(parents), vjp)
    return out


def backward(loss):
    """Reverse-mode sweep from a scalar loss.

    Accumulates into ``t.grad`` for every tensor with requires_grad
    reachable from the loss. Parameters not on the loss's graph keep
    ``grad=None`` (read as zero).
    """
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not np.isfinite(loss.data):
        raise FloatingPointError("non-finite loss")
    if loss.node is None:
        if loss.requires_grad:
            g = np.ones_like(loss.data)
            loss.grad = g if loss.grad is None else loss.grad + g
        return

    # Gather reachable recorded tensors; creation order is topological.
    stack = [loss]
    seen = {id(loss)}
    ordered = []
    while stack:
        t = stack.pop()
        ordered.append(t)
        for p in t.node.parents:
            if isinstance(p, Tensor) and p.node is not None and id(p) not in seen:
                seen.add(id(p))
                stack.append(p)
    ordered.sort(key=lambda t: t.node.seq, reverse=True)

    grads = {id(loss): np.ones_like(loss.data)}
    for t in ordered:
        g = grads.pop(id(t), None)
        if g is None:
            continue
        parent_grads = t.node.vjp(g)
        for p, pg in zip(t.node.parents, parent_grads):
            if pg is None or not isinstance(p, Tensor):
                continue
            if p.node is None and not p.requires_grad:
                continue
            if p.node is None:
                # Leaf: accumulate straight into .grad.
                p.grad = pg if p.grad is None else p.grad + pg
            else:
                prev = grads.get(id(p))
                grads[id(p)] = pg if prev is None else prev + pg


def gradients(loss, params):
    """Gradient of a scalar loss for each parameter (zeros if unreachable)."""
    for p in params:
        p.zero_grad()
    backward(loss)
    return [
        p.grad if p.grad is not None else np.zeros_like(p.data) for p in params
    ]
