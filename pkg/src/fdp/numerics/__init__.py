"""Differentiable computation substrate: tensors, ops, gradient checks."""

from fdp.numerics.tensor import Tensor, backward, gradients, no_grad, tensor
from fdp.numerics import ops
from fdp.numerics.gradcheck import grad_check

__all__ = ["Tensor", "tensor", "backward", "gradients", "no_grad", "ops", "grad_check"]
