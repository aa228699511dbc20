"""Frame encoder: convolutional stem, stacked local/global relational
aggregator stages, and a batchnorm + global-average-pool head.

Each stage starts with a patch embedding (strided convolution) that
halves the spatial extent, followed by ``blocks_local`` convolutional
aggregators and ``blocks_global`` attention aggregators. All aggregators
preserve shape and collapse to the identity map when their weights are
zero, since every sub-block is wrapped in a residual connection.
"""

from dataclasses import dataclass, field

import numpy as np

from fdp import nn
from fdp.numerics import ops


@dataclass
class EncoderConfig:
    in_channels: int = 3
    stem_channels: int = 16
    stage_channels: tuple = (32, 64, 128, 256)
    blocks_local: int = 2
    blocks_global: int = 1
    heads: int = 4
    patch_size: int = 2
    mlp_ratio: int = 2
    attn_dropout: float = 0.1

    @property
    def num_stages(self):
        return len(self.stage_channels)

    @property
    def feature_width(self):
        return self.stage_channels[-1]

    def validate(self):
        for ch in (self.stem_channels, *self.stage_channels):
            if ch <= 0:
                raise ValueError("channel counts must be positive")
        for ch in self.stage_channels:
            if ch % self.heads:
                raise ValueError(
                    f"stage channels {ch} not divisible by {self.heads} heads"
                )
        return self


class MultiHeadConvBlock(nn.Module):
    """h parallel per-group conv+BN+ReLU paths, concatenated and fused by a
    pointwise convolution."""

    def __init__(self, rng, channels, heads):
        super().__init__()
        if channels % heads:
            raise ValueError(f"{channels} channels not divisible by {heads} heads")
        self.heads = heads
        group = channels // heads
        self.convs = [
            nn.Conv2d(rng, group, group, 3, padding=1, bias=False)
            for _ in range(heads)
        ]
        self.norms = [nn.BatchNorm2d(group) for _ in range(heads)]
        self.fuse = nn.Conv2d(rng, channels, channels, 1)

    def forward(self, x):
        group = x.shape[1] // self.heads
        outs = []
        for i in range(self.heads):
            xi = ops.slice_axis(x, 1, i * group, (i + 1) * group)
            outs.append(ops.relu(self.norms[i].forward(self.convs[i].forward(xi))))
        return self.fuse.forward(ops.concat(outs, axis=1))


class ChannelMlp(nn.Module):
    """Per-position two-layer MLP, realized as pointwise convolutions."""

    def __init__(self, rng, channels, ratio):
        super().__init__()
        hidden = channels * ratio
        self.expand = nn.Conv2d(rng, channels, hidden, 1)
        self.project = nn.Conv2d(rng, hidden, channels, 1)

    def forward(self, x):
        return self.project.forward(ops.relu(self.expand.forward(x)))


class SelfAttention(nn.Module):
    """Multi-head self-attention over the H*W token grid.

    Channels are split into per-head groups; each head applies its own
    query/key/value projections, scores are softmax(Q K^T / sqrt(dim)),
    and fused head outputs pass through an output projection, then a
    per-position feed-forward layer followed by dropout.
    """

    def __init__(self, rng, channels, heads, dropout_rate, dropout_rng):
        super().__init__()
        if channels % heads:
            raise ValueError(f"{channels} channels not divisible by {heads} heads")
        self.heads = heads
        self.dim = channels // heads
        shape = (heads, self.dim, self.dim)
        self.w_query = nn.xavier_uniform(rng, shape, self.dim, self.dim)
        self.w_key = nn.xavier_uniform(rng, shape, self.dim, self.dim)
        self.w_value = nn.xavier_uniform(rng, shape, self.dim, self.dim)
        self.w_out = nn.Linear(rng, channels, channels)
        self.ffn = nn.Linear(rng, channels, channels)
        self.drop = nn.Dropout(dropout_rate, dropout_rng)

    def attend(self, tokens):
        """tokens (N, T, C) -> (N, T, C); heads handled batched."""
        n, t, c = tokens.shape
        heads = ops.transpose(
            ops.reshape(tokens, (n, t, self.heads, self.dim)), (0, 2, 1, 3)
        )  # (N, h, T, dim)
        q = ops.matmul(heads, self.w_query)
        k = ops.matmul(heads, self.w_key)
        v = ops.matmul(heads, self.w_value)
        scores = ops.scale(
            ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(self.dim)
        )
        attn = ops.softmax(scores, axis=-1)
        fused = ops.reshape(
            ops.transpose(ops.matmul(attn, v), (0, 2, 1, 3)), (n, t, c)
        )
        return self.drop.forward(self.ffn.forward(self.w_out.forward(fused)))

    def forward(self, x):
        n, c, h, w = x.shape
        tokens = ops.transpose(ops.reshape(x, (n, c, h * w)), (0, 2, 1))
        out = self.attend(tokens)
        return ops.reshape(ops.transpose(out, (0, 2, 1)), (n, c, h, w))


class LocalAggregator(nn.Module):
    """x + MultiHeadConv(x), then + MLP: convolutional context aggregation."""

    def __init__(self, rng, channels, heads, mlp_ratio):
        super().__init__()
        self.mix = MultiHeadConvBlock(rng, channels, heads)
        self.mlp = ChannelMlp(rng, channels, mlp_ratio)

    def forward(self, x):
        x = ops.add(x, self.mix.forward(x))
        return ops.add(x, self.mlp.forward(x))


class GlobalAggregator(nn.Module):
    """Pointwise conv + self-attention, multi-head conv, and MLP, each of
    the three groups wrapped in a residual connection."""

    def __init__(self, rng, channels, heads, mlp_ratio, attn_dropout, dropout_rng):
        super().__init__()
        self.pre = nn.Conv2d(rng, channels, channels, 1)
        self.attn = SelfAttention(rng, channels, heads, attn_dropout, dropout_rng)
        self.mix = MultiHeadConvBlock(rng, channels, heads)
        self.mlp = ChannelMlp(rng, channels, mlp_ratio)

    def forward(self, x):
        x = ops.add(x, self.attn.forward(self.pre.forward(x)))
        x = ops.add(x, self.mix.forward(x))
        return ops.add(x, self.mlp.forward(x))


class PatchEmbed(nn.Module):
    """ViT-style patch embedding: convolution with kernel = stride = p."""

    def __init__(self, rng, in_ch, out_ch, patch):
        super().__init__()
        self.patch = patch
        self.proj = nn.Conv2d(rng, in_ch, out_ch, patch, stride=patch)

    def forward(self, x):
        _, _, h, w = x.shape
        if h % self.patch or w % self.patch:
            raise ValueError(
                f"patch size {self.patch} does not divide extents {h}x{w}"
            )
        return self.proj.forward(x)


class Stage(nn.Module):
    def __init__(self, rng, in_ch, out_ch, cfg, dropout_rng):
        super().__init__()
        self.embed = PatchEmbed(rng, in_ch, out_ch, cfg.patch_size)
        self.local = [
            LocalAggregator(rng, out_ch, cfg.heads, cfg.mlp_ratio)
            for _ in range(cfg.blocks_local)
        ]
        self.globals_ = [
            GlobalAggregator(
                rng, out_ch, cfg.heads, cfg.mlp_ratio, cfg.attn_dropout, dropout_rng
            )
            for _ in range(cfg.blocks_global)
        ]

    def forward(self, x):
        x = self.embed.forward(x)
        for block in self.local:
            x = block.forward(x)
        for block in self.globals_:
            x = block.forward(x)
        return x


class FrameEncoder(nn.Module):
    """Maps a batch of frames (N, C, H, W) to feature vectors (N, d_F)."""

    def __init__(self, rng, cfg: EncoderConfig, dropout_rng):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        # 4x4/stride-2/pad-1 halves even extents exactly (a 3x3 stride-2
        # stem cannot tile an even input under the exact-geometry contract)
        self.stem = nn.Conv2d(
            rng, cfg.in_channels, cfg.stem_channels, 4, stride=2, padding=1, bias=False
        )
        self.stem_norm = nn.BatchNorm2d(cfg.stem_channels)
        chans = [cfg.stem_channels, *cfg.stage_channels]
        self.stages = [
            Stage(rng, chans[i], chans[i + 1], cfg, dropout_rng)
            for i in range(cfg.num_stages)
        ]
        self.head_norm = nn.BatchNorm2d(cfg.feature_width)

    def forward(self, x):
        x = ops.relu(self.stem_norm.forward(self.stem.forward(x)))
        for stage in self.stages:
            x = stage.forward(x)
        return ops.global_avg_pool(self.head_norm.forward(x))
