"""The gradient verification suite behind `fdp gradcheck`.

Per-op checks run in float64 against a 1e-5 relative tolerance; batch
norm is additionally checked in float32 (1e-3), and the composed
three-term loss on a micro model is checked in float32 (1e-2, dropout
disabled, randomly sampled coordinates).
"""

import numpy as np

from fdp.numerics import Tensor, ops
from fdp.numerics.gradcheck import grad_check

OP_TOL = 1e-5
BN_F32_TOL = 1e-3
FULL_TOL = 1e-2


def _away_from(rng, shape, gap=0.2):
    """Random values bounded away from 0 (kinks of relu/abs/max)."""
    x = rng.standard_normal(shape)
    return x + np.sign(x) * gap


def _scalarize(op):
    """Wrap an array->array op into sum(op(x) * c) with a fixed cotangent."""

    def build(rng, *arrays):
        consts = None

        def f(inputs):
            nonlocal consts
            out = op(*inputs)
            if consts is None:
                crng = np.random.default_rng(123)
                consts = Tensor(crng.standard_normal(out.shape))
            return ops.sum_(ops.mul(out, consts))

        return f, [Tensor(a) for a in arrays]

    return build


def op_checks(rng):
    """Yield (name, f, inputs, eps) for every differentiable op, float64."""
    r = rng
    x22 = r.standard_normal((3, 4))
    cases = []

    def case(name, op, *arrays):
        f, inputs = _scalarize(op)(r, *arrays)
        cases.append((name, f, inputs, 1e-5))

    case("add_broadcast", lambda a, b: ops.add(a, b), r.standard_normal((2, 3, 4)), r.standard_normal((1, 3, 1)))
    case("sub", ops.sub, x22, r.standard_normal((3, 4)))
    case("mul_broadcast", ops.mul, r.standard_normal((2, 3)), r.standard_normal((3,)))
    case("neg", ops.neg, x22)
    case("scale", lambda a: ops.scale(a, -2.5), x22)
    case("abs", ops.absolute, _away_from(r, (3, 5)))
    case("matmul", ops.matmul, r.standard_normal((3, 4)), r.standard_normal((4, 2)))
    case("matmul_batched", ops.matmul, r.standard_normal((2, 2, 3, 4)), r.standard_normal((2, 4, 5)))
    case("sum_axis", lambda a: ops.sum_(a, axis=1), r.standard_normal((3, 4, 2)))
    case("mean_axis", lambda a: ops.mean_(a, axis=0), r.standard_normal((4, 3)))
    case("reshape", lambda a: ops.reshape(a, (6, 2)), r.standard_normal((3, 4)))
    case("transpose", lambda a: ops.transpose(a, (1, 2, 0)), r.standard_normal((2, 3, 4)))
    case("concat", lambda a, b: ops.concat([a, b], axis=1), r.standard_normal((2, 3)), r.standard_normal((2, 2)))
    case("slice", lambda a: ops.slice_axis(a, 1, 1, 3), r.standard_normal((2, 4, 3)))
    case("relu", ops.relu, _away_from(r, (3, 4)))
    case("leaky_relu", lambda a: ops.leaky_relu(a, 0.01), _away_from(r, (3, 4)))
    case("sigmoid", ops.sigmoid, r.standard_normal((3, 4)))
    case("softmax", lambda a: ops.softmax(a, axis=-1), r.standard_normal((3, 5)))
    case("log_clamped", lambda a: ops.log_clamped(a), r.uniform(0.1, 2.0, (3, 4)))
    case(
        "dropout_fixed_mask",
        lambda a: ops.dropout(a, 0.3, np.random.default_rng(7), True),
        r.standard_normal((4, 5)),
    )
    case(
        "conv2d_s1p1",
        lambda x, w, b: ops.conv2d(x, w, b, stride=1, padding=1),
        r.standard_normal((2, 3, 5, 5)),
        r.standard_normal((4, 3, 3, 3)) * 0.4,
        r.standard_normal(4) * 0.1,
    )
    case(
        "conv2d_s2",
        lambda x, w: ops.conv2d(x, w, stride=2, padding=1),
        r.standard_normal((1, 2, 6, 6)),
        r.standard_normal((3, 2, 4, 4)) * 0.4,
    )
    case(
        "conv_transpose2d",
        lambda x, w, b: ops.conv_transpose2d(x, w, b, stride=2),
        r.standard_normal((2, 3, 4, 4)),
        r.standard_normal((3, 2, 2, 2)) * 0.4,
        r.standard_normal(2) * 0.1,
    )
    case(
        "conv3d",
        lambda x, w, b: ops.conv3d(x, w, b, padding=(0, 1, 1)),
        r.standard_normal((2, 1, 4, 5, 5)),
        r.standard_normal((3, 1, 4, 3, 3)) * 0.4,
        r.standard_normal(3) * 0.1,
    )
    case("maxpool2d", lambda a: ops.maxpool2d(a, 2), _distinct_grid(r, (2, 3, 6, 6)))
    case("global_avg_pool", ops.global_avg_pool, r.standard_normal((2, 3, 4, 4)))
    case(
        "linear",
        ops.linear,
        r.standard_normal((4, 6)),
        r.standard_normal((6, 3)),
        r.standard_normal(3) * 0.1,
    )

    rm, rv = np.zeros(3), np.ones(3)
    case(
        "batch_norm_train",
        lambda x, g, b: ops.batch_norm2d(x, g, b, rm.copy(), rv.copy(), True),
        r.standard_normal((4, 3, 5, 5)),
        r.standard_normal(3) + 1.5,
        r.standard_normal(3) * 0.2,
    )
    case(
        "batch_norm_eval",
        lambda x, g, b: ops.batch_norm2d(
            x, g, b, r.standard_normal(3) * 0 + 0.3, np.ones(3) * 1.7, False
        ),
        r.standard_normal((4, 3, 5, 5)),
        r.standard_normal(3) + 1.5,
        r.standard_normal(3) * 0.2,
    )
    return cases


def _distinct_grid(rng, shape):
    """Values with unique magnitudes so max-pool ties cannot occur."""
    n = int(np.prod(shape))
    vals = rng.permutation(n).astype(np.float64) / n + rng.standard_normal() * 0.0
    return vals.reshape(shape)


def batch_norm_f32_check():
    rng = np.random.default_rng(11)
    rm, rv = np.zeros(3, np.float32), np.ones(3, np.float32)
    consts = Tensor(rng.standard_normal((4, 3, 5, 5)).astype(np.float32))

    def f(inputs):
        out = ops.batch_norm2d(inputs[0], inputs[1], inputs[2], rm.copy(), rv.copy(), True)
        return ops.sum_(ops.mul(out, consts))

    inputs = [
        Tensor(rng.standard_normal((4, 3, 5, 5)).astype(np.float32)),
        Tensor((rng.standard_normal(3) + 1.5).astype(np.float32)),
        Tensor((rng.standard_normal(3) * 0.2).astype(np.float32)),
    ]
    return grad_check(f, inputs, eps=1e-2)


def full_loss_f32_check(max_coords=4):
    """Composed loss on a 2-clip micro model, float32, dropout off."""
    from fdp.config import RunConfig
    from fdp.training import build_model, compute_losses

    cfg = RunConfig(
        t=2,
        crop=16,
        stem_channels=4,
        stage_channels=(8, 16),
        heads=2,
        mlp_ratio=2,
        attn_dropout=0.0,
        temporal_channels=8,
        mer_hidden=16,
        dic_channels=(8, 8),
        dic_head_channels=(8, 8),
        num_classes=3,
        seed=5,
    )
    model = build_model(cfg, 3)
    rng = np.random.default_rng(17)
    clips = rng.random((2, 2, 3, 16, 16)).astype(np.float32)
    labels = np.array([0, 2])
    targets = rng.random((2, 1, 16, 16)).astype(np.float32)

    def f(_):
        return compute_losses(model, clips, labels, targets, cfg)[0]

    return grad_check(
        f,
        model.parameters(),
        eps=1e-2,
        max_coords=max_coords,
        rng=np.random.default_rng(23),
    )


def run_suite(verbose_print=None):
    """Run everything; returns (results, all_passed) where results are
    (name, max_rel_err, tolerance, passed)."""
    rng = np.random.default_rng(42)
    results = []
    for name, f, inputs, eps in op_checks(rng):
        err = grad_check(f, inputs, eps=eps)
        results.append((name, err, OP_TOL, err < OP_TOL))
    err = batch_norm_f32_check()
    results.append(("batch_norm_train_f32", err, BN_F32_TOL, err < BN_F32_TOL))
    err = full_loss_f32_check()
    results.append(("full_loss_micro_f32", err, FULL_TOL, err < FULL_TOL))
    if verbose_print is not None:
        for name, err, tol, ok in results:
            verbose_print(
                f"{'PASS' if ok else 'FAIL'} {name:<24} max_rel_err={err:.3e} tol={tol:.0e}"
            )
    return results, all(ok for _, _, _, ok in results)
