"""Task heads over the shared dynamic representation, and the losses.

The classification head is max-pool + two fully-connected layers ending
in a softmax. The reconstruction head is a fully convolutional
encoder-decoder with additive skip connections, followed by extra
upsampling blocks out to the crop extent and a sigmoid, so predicted
dynamic images live strictly in (0, 1).
"""

from dataclasses import dataclass

import numpy as np

from fdp import nn
from fdp.numerics import Tensor, ops

LOG_FLOOR = 1e-12


@dataclass
class HeadConfig:
    num_classes: int = 3
    temporal_channels: int = 32
    mer_hidden: int = 128
    mer_pool: int = 2
    dic_channels: tuple = (64, 128, 256, 256)
    dic_head_channels: tuple = (64, 32)
    output_extent: int = 64
    leaky_slope: float = 0.01

    def validate(self, grid):
        hr, wr = grid
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if hr != wr or hr & (hr - 1):
            raise ValueError(f"dynamic representation grid {hr}x{wr} must be square power of two")
        depth = int(np.log2(hr))
        if len(self.dic_channels) != depth:
            raise ValueError(
                f"dic_channels needs {depth} entries to pool {hr} down to 1"
            )
        up = self.output_extent // hr
        if up & (up - 1) or up < 1:
            raise ValueError("output extent must be grid * power of two")
        if int(np.log2(up)) != len(self.dic_head_channels):
            raise ValueError(
                f"dic_head_channels needs {int(np.log2(up))} entries "
                f"to upsample {hr} to {self.output_extent}"
            )
        return self


class MerHead(nn.Module):
    """Max-pool, flatten, hidden FC + ReLU, class FC, softmax."""

    def __init__(self, rng, cfg, grid):
        super().__init__()
        hr, wr = grid
        self.pool = cfg.mer_pool
        flat = cfg.temporal_channels * (hr // cfg.mer_pool) * (wr // cfg.mer_pool)
        self.fc1 = nn.Linear(rng, flat, cfg.mer_hidden)
        self.fc2 = nn.Linear(rng, cfg.mer_hidden, cfg.num_classes)

    def forward(self, rep):
        """(B, C_d, H_r, W_r) -> class probabilities (B, m)."""
        x = ops.maxpool2d(rep, self.pool)
        x = ops.reshape(x, (x.shape[0], -1))
        x = ops.relu(self.fc1.forward(x))
        return ops.softmax(self.fc2.forward(x), axis=-1)


def predicted_class(probs):
    """Argmax class per row; ties resolve to the lowest index."""
    return probs.data.argmax(axis=-1)


class DicEncoderBlock(nn.Module):
    def __init__(self, rng, in_ch, out_ch, slope):
        super().__init__()
        self.slope = slope
        self.conv = nn.Conv2d(rng, in_ch, out_ch, 3, padding=1, bias=False)
        self.norm = nn.BatchNorm2d(out_ch)

    def forward(self, x):
        x = ops.leaky_relu(self.norm.forward(self.conv.forward(x)), self.slope)
        return ops.maxpool2d(x, 2)


class DicDecoderBlock(nn.Module):
    """Deconv upsample, optional additive encoder skip, conv + BN + leaky."""

    def __init__(self, rng, in_ch, out_ch, slope):
        super().__init__()
        self.slope = slope
        self.up = nn.ConvTranspose2d(rng, in_ch, out_ch, 2, stride=2)
        self.conv = nn.Conv2d(rng, out_ch, out_ch, 3, padding=1, bias=False)
        self.norm = nn.BatchNorm2d(out_ch)

    def forward(self, x, skip=None):
        x = self.up.forward(x)
        if skip is not None:
            x = ops.add(x, skip)
        return ops.leaky_relu(self.norm.forward(self.conv.forward(x)), self.slope)


class DicNetwork(nn.Module):
    """Fully convolutional reconstruction head.

    Encoder blocks halve the extent down to 1x1; the decoder mirrors them
    with additive skips from the pre-pool encoder maps; upsampling blocks
    continue past the input extent to the crop size; a pointwise conv and
    sigmoid emit the single-channel image.
    """

    def __init__(self, rng, cfg, grid):
        super().__init__()
        chans = [cfg.temporal_channels, *cfg.dic_channels]
        slope = cfg.leaky_slope
        self.encoders = [
            DicEncoderBlock(rng, chans[i], chans[i + 1], slope)
            for i in range(len(cfg.dic_channels))
        ]
        rev = list(reversed(chans[1:]))  # deepest first
        self.decoders = [
            DicDecoderBlock(rng, rev[i], rev[i + 1] if i + 1 < len(rev) else rev[-1], slope)
            for i in range(len(rev))
        ]
        up_chans = [rev[-1], *cfg.dic_head_channels]
        self.upsamplers = [
            DicDecoderBlock(rng, up_chans[i], up_chans[i + 1], slope)
            for i in range(len(cfg.dic_head_channels))
        ]
        self.out_conv = nn.Conv2d(rng, up_chans[-1], 1, 1)

    def forward(self, rep):
        """(B, C_d, H_r, W_r) -> (B, 1, S, S) in (0, 1)."""
        x = rep
        skips = []
        for block in self.encoders:
            x = block.forward(x)
            skips.append(x)
        # decoder i upsamples to the extent of encoder output depth-2-i and
        # adds that map; the bottleneck (skips[-1]) is the decoder input
        # itself, and the final decoder reaching the input extent has no
        # channel-compatible counterpart
        for i, block in enumerate(self.decoders):
            j = len(skips) - 2 - i
            skip = skips[j] if j >= 0 else None
            x = block.forward(x, skip)
        for block in self.upsamplers:
            x = block.forward(x)
        return ops.sigmoid(self.out_conv.forward(x))


def mer_loss(probs, labels):
    """Cross-entropy against one-hot labels: mean over batch of -log p_c,
    with the log clamped at 1e-12."""
    b, m = probs.shape
    onehot = np.zeros((b, m), dtype=probs.dtype)
    onehot[np.arange(b), np.asarray(labels, dtype=int)] = 1.0
    picked = ops.sum_(ops.mul(ops.log_clamped(probs, LOG_FLOOR), Tensor(onehot)), axis=1)
    return ops.neg(ops.mean_(picked))


def dic_loss(pred, target):
    """Pixel MSE between predicted and ground-truth dynamic images."""
    if pred.shape != tuple(np.shape(target.data if isinstance(target, Tensor) else target)):
        raise ValueError(f"extent mismatch: {pred.shape} vs {np.shape(target)}")
    target = target if isinstance(target, Tensor) else Tensor(np.asarray(target, dtype=pred.dtype))
    diff = ops.sub(pred, target)
    return ops.mean_(ops.mul(diff, diff))


def full_loss(l_mer, l_dic, l_rank, lambda_d, lambda_r, lambda_mer=1.0):
    """Weighted sum of task losses; lambda_mer exists only for the
    classification-free ablation and defaults to the standard 1."""
    total = ops.scale(l_mer, lambda_mer)
    total = ops.add(total, ops.scale(l_dic, lambda_d))
    return ops.add(total, ops.scale(l_rank, lambda_r))
