"""Finite-difference verification of reverse-mode gradients."""

import numpy as np

from fdp.numerics.tensor import Tensor, gradients, no_grad


def grad_check(f, inputs, eps=1e-5, max_coords=None, rng=None, skip_kinks=False):
    """Max relative error between reverse-mode and central differences.

    ``f`` maps a list of Tensors to a scalar Tensor and must be safe to
    re-evaluate (stateless, or reseeding its own randomness per call).
    Error per coordinate is |analytic - fd| / max(1, |analytic|); the
    maximum over all checked coordinates of all inputs is returned.

    ``max_coords`` caps the number of coordinates checked per input
    (random subsample, for large parameter sets); default checks all.

    ``skip_kinks`` handles piecewise-smooth functions (relu, max-pool,
    absolute value): each coordinate is probed at eps, eps/2 and eps/4,
    disagreement between scales flags a non-smooth point inside the
    window and drops the coordinate, and the survivors use a Richardson
    extrapolation of the two smallest scales (cancels the O(eps^2)
    truncation term). The return includes only surviving coordinates;
    at least half must survive or the check raises.
    """
    eps = float(eps)
    if not 1e-6 <= eps <= 1e-2:
        raise ValueError(f"eps {eps} outside [1e-6, 1e-2]")
    inputs = [t if isinstance(t, Tensor) else Tensor(t) for t in inputs]
    for t in inputs:
        t.requires_grad = True

    out = f(inputs)
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    if not np.isfinite(out.data):
        raise FloatingPointError("non-finite value during grad_check forward")
    analytic = gradients(out, inputs)

    if rng is None:
        rng = np.random.default_rng(0)

    def probe(flat, i, step):
        orig = flat[i]
        with no_grad():
            flat[i] = orig + step
            hi = float(f(inputs).data)
            flat[i] = orig - step
            lo = float(f(inputs).data)
        flat[i] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FloatingPointError("non-finite value during grad_check probe")
        return (hi - lo) / (2.0 * step)

    worst = 0.0
    probed = 0
    survived = 0
    for t, grad in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        n = flat.size
        coords = np.arange(n)
        if max_coords is not None and n > max_coords:
            coords = rng.choice(n, size=max_coords, replace=False)
        for i in coords:
            probed += 1
            fd = probe(flat, i, eps)
            if skip_kinks:
                fd_half = probe(flat, i, eps / 2.0)
                fd_quarter = probe(flat, i, eps / 4.0)
                scale = max(1.0, abs(fd), abs(fd_half), abs(fd_quarter))
                if (
                    abs(fd - fd_half) > 0.02 * scale
                    or abs(fd_half - fd_quarter) > 0.02 * scale
                ):
                    continue  # non-smooth point inside the probe window
                fd = (4.0 * fd_quarter - fd_half) / 3.0
            survived += 1
            a = float(grad.reshape(-1)[i])
            err = abs(a - fd) / max(1.0, abs(a))
            if err > worst:
                worst = err
    if skip_kinks and survived < probed / 2:
        raise FloatingPointError(
            f"grad_check: only {survived}/{probed} coordinates were smooth "
            "at probe scale; cannot certify gradients"
        )
    return worst
