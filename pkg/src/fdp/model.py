"""End-to-end model: frame encoder -> rank scorer + temporal pooling ->
classification and dynamic-image heads."""

from dataclasses import dataclass

import numpy as np

from fdp import nn
from fdp.dynamics import RankScorer, TemporalPool
from fdp.encoder import EncoderConfig, FrameEncoder
from fdp.heads import DicNetwork, HeadConfig, MerHead
from fdp.numerics import ops


@dataclass
class ModelOutput:
    probs: object  # (B, m) Tensor
    rank_scores: object  # (B, t) Tensor
    dynamic_image: object  # (B, 1, S, S) Tensor
    representation: object  # (B, C_d, H_r, W_r) Tensor


class FdpModel(nn.Module):
    def __init__(self, rng, encoder_cfg: EncoderConfig, head_cfg: HeadConfig,
                 clip_frames: int):
        super().__init__()
        self.clip_frames = clip_frames
        # one stream drives dropout so saved/restored models replay identically
        self.dropout_rng = np.random.default_rng(rng.integers(2**63))
        self.encoder = FrameEncoder(rng, encoder_cfg, self.dropout_rng)
        d_f = encoder_cfg.feature_width
        self.scorer = RankScorer(rng, d_f)
        self.temporal = TemporalPool(rng, clip_frames, d_f, head_cfg.temporal_channels)
        head_cfg.validate(self.temporal.grid)
        self.mer = MerHead(rng, head_cfg, self.temporal.grid)
        self.dic = DicNetwork(rng, head_cfg, self.temporal.grid)

    def forward(self, clips):
        """clips: (B, t, C, H, W) Tensor of preprocessed frames."""
        b, t, c, h, w = clips.shape
        if t != self.clip_frames:
            raise ValueError(f"model expects {self.clip_frames} frames, got {t}")
        frames = ops.reshape(clips, (b * t, c, h, w))
        feats = self.encoder.forward(frames)  # (B*t, d_F)
        scores = ops.reshape(self.scorer.forward(feats), (b, t))
        rep = self.temporal.forward(ops.reshape(feats, (b, t, feats.shape[-1])))
        return ModelOutput(
            probs=self.mer.forward(rep),
            rank_scores=scores,
            dynamic_image=self.dic.forward(rep),
            representation=rep,
        )
