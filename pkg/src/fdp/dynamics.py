"""Rank scoring of frame features and temporal pooling into the shared
clip-level dynamic representation."""

import numpy as np

from fdp import nn
from fdp.numerics import Tensor, ops


def most_square_factors(n):
    """Factor n = a*b with a <= b and a as large as possible (256 -> 16x16)."""
    a = int(np.sqrt(n))
    while n % a:
        a -= 1
    return a, n // a


class RankScorer(nn.Module):
    """Linear functional u: score(x) = u . x, one scalar per frame feature."""

    def __init__(self, rng, feature_width):
        super().__init__()
        self.u = nn.xavier_uniform(rng, (feature_width, 1), feature_width, 1)

    def forward(self, features):
        """(N, d_F) -> (N,) rank scores."""
        if features.shape[-1] != self.u.shape[0]:
            raise ValueError(
                f"feature width {features.shape[-1]} != scorer width {self.u.shape[0]}"
            )
        return ops.reshape(ops.matmul(features, self.u), (features.shape[0],))


def rank_targets(t, slope, dtype=np.float32):
    """Chronological targets K(k) = slope * k for k = 0..t-1."""
    if slope <= 0:
        raise ValueError("rank target slope must be positive")
    return (slope * np.arange(t)).astype(dtype)


def rank_loss(scores, slope=1.0):
    """L1 deviation of scores from the increasing line a*k.

    ``scores`` is (B, t); per-clip losses sum over frames, then average
    over the batch. Zero exactly when every clip's scores sit on the line.
    """
    b, t = scores.shape
    target = Tensor(np.broadcast_to(rank_targets(t, slope, scores.dtype), (b, t)))
    per_clip = ops.sum_(ops.absolute(ops.sub(target, scores)), axis=1)
    return ops.mean_(per_clip)


class TemporalPool(nn.Module):
    """3-D convolution over the stacked per-frame feature maps.

    Each frame feature (width d_F) is reshaped row-major to 1 x H_r x W_r,
    frames stack along the temporal axis, and a kernel spanning the full
    temporal extent (spatial 3x3, padding 1, no bias so the map is linear)
    collapses time into C_d output channels.
    """

    def __init__(self, rng, frames, feature_width, out_channels):
        super().__init__()
        self.frames = frames
        self.grid = most_square_factors(feature_width)
        self.conv = nn.Conv3d(
            rng, 1, out_channels, kt=frames, k=3, padding=(0, 1, 1), bias=False
        )

    def forward(self, features):
        """(B, t, d_F) -> (B, C_d, H_r, W_r)."""
        b, t, d = features.shape
        if t != self.frames:
            raise ValueError(f"expected {self.frames} frames, got {t}")
        hr, wr = self.grid
        maps = ops.reshape(features, (b, 1, t, hr, wr))
        out = self.conv.forward(maps)  # (B, C_d, 1, H_r, W_r)
        return ops.reshape(out, (b, out.shape[1], hr, wr))
