"""Clip frame sampling and train/eval preprocessing.

Sampling: stride s = max(1, floor(L / t)); indices are offset + k*s.
Training draws the offset uniformly from [0, L-1-(t-1)*s]; evaluation
uses offset 0. Too-short clips clamp to the final frame.

Preprocessing: crop a c*c window from the aligned s*s frame (s=72 by
default) and optionally flip horizontally. The training origin jitters
uniformly within +-4 of center (for the standard 72 -> 64 crop this is
exactly the [0, 8]^2 window); evaluation uses the center origin. One
crop origin and one flip decision apply to a whole clip, anything
per-frame would corrupt the motion signal.
"""

import numpy as np

CROP_JITTER = 4


def sample_offset_range(length, t):
    """Largest valid sampling offset (0 when the clip is short)."""
    stride = max(1, length // t)
    return max(0, length - 1 - (t - 1) * stride)


def sample_clip_indices(length, t, offset=0):
    """t frame indices into a clip of `length` frames."""
    if length < 1 or t < 1:
        raise ValueError("length and t must be positive")
    stride = max(1, length // t)
    idx = offset + stride * np.arange(t)
    return np.minimum(idx, length - 1)


def eval_crop_origin(source, crop):
    if crop > source:
        raise ValueError(f"crop {crop} exceeds source extent {source}")
    return (source - crop) // 2


def train_crop_origin(source, crop, rng):
    center = (source - crop) // 2
    lo = max(0, center - CROP_JITTER)
    hi = min(source - crop, center + CROP_JITTER)
    return int(rng.integers(lo, hi + 1))


def preprocess_clip(frames, crop, origin_y, origin_x, flip):
    """Crop all frames of a clip at one origin; optionally mirror width.

    frames: (T, C, S, S) array in [0, 1]; returns float32 (T, C, crop, crop).
    """
    frames = np.asarray(frames)
    if frames.ndim != 4:
        raise ValueError(f"expected (T, C, S, S) frames, got shape {frames.shape}")
    size = frames.shape[-1]
    if not (0 <= origin_y <= size - crop and 0 <= origin_x <= size - crop):
        raise ValueError(f"crop origin ({origin_y}, {origin_x}) out of range")
    window = frames[..., origin_y : origin_y + crop, origin_x : origin_x + crop]
    if flip:
        window = window[..., ::-1]
    return np.ascontiguousarray(window, dtype=np.float32)
