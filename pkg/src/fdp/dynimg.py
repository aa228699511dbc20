"""Ground-truth dynamic images by approximate rank pooling.

This module is plain NumPy with no dependency on the autodiff stack, so
it can serve as an independent oracle for the reconstruction head.

The pooled image is a per-pixel weighted sum of the frames with the
closed-form coefficients

    alpha_t = 2*(T - t + 1) - (T + 1) * (H_T - H_{t-1}),   t = 1..T

where H_n is the n-th harmonic number (H_0 = 0). The coefficients sum
to zero, weighting early frames negatively and later frames positively,
so static content cancels and the result encodes temporal evolution on
top of appearance.
"""

import numpy as np


def rank_pool_coefficients(num_frames):
    """Closed-form rank-pooling weights for a clip of T >= 2 frames."""
    if num_frames < 2:
        raise ValueError(f"rank pooling needs at least 2 frames, got {num_frames}")
    t = np.arange(1, num_frames + 1, dtype=np.float64)
    harmonic = np.concatenate([[0.0], np.cumsum(1.0 / t)])  # H_0..H_T
    return 2.0 * (num_frames - t + 1.0) - (num_frames + 1.0) * (
        harmonic[num_frames] - harmonic[:-1][t.astype(int) - 1]
    )


def to_grayscale(frame):
    """Channel mean for (C, H, W) input; (H, W) passes through."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 3:
        return frame.mean(axis=0)
    if frame.ndim == 2:
        return frame
    raise ValueError(f"expected (H, W) or (C, H, W) frame, got shape {frame.shape}")


def dynamic_image(frames):
    """Rank-pool a clip of frames in [0, 1] into a single [0, 1] image.

    Frames may be (T, H, W) grayscale or (T, C, H, W) color (pooled on the
    channel mean). The weighted sum is min-max normalized; a motionless
    clip (zero range) maps to uniform 0.5.
    """
    gray = [to_grayscale(f) for f in frames]
    if len(gray) < 2:
        raise ValueError("dynamic image needs at least 2 frames")
    base = gray[0].shape
    for g in gray:
        if g.shape != base:
            raise ValueError(f"frame extent mismatch: {g.shape} vs {base}")
    coeffs = rank_pool_coefficients(len(gray))
    pooled = np.zeros(base, dtype=np.float64)
    for a, g in zip(coeffs, gray):
        pooled += a * g
    lo, hi = pooled.min(), pooled.max()
    if hi - lo <= 0.0:
        return np.full(base, 0.5)
    return (pooled - lo) / (hi - lo)


def average_mse(pairs):
    """Mean over samples of per-sample pixel MSE between (predicted, true)."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("average_mse over an empty set")
    total = 0.0
    for pred, true in pairs:
        pred = np.asarray(pred, dtype=np.float64)
        true = np.asarray(true, dtype=np.float64)
        if pred.shape != true.shape:
            raise ValueError(f"extent mismatch: {pred.shape} vs {true.shape}")
        total += float(np.mean((pred - true) ** 2))
    return total / len(pairs)
