"""Dataset plumbing: portable-map I/O, manifests, clip sampling and
preprocessing, and the synthetic micro-motion generator."""

from fdp.data.pnm import PnmError, TruncatedPnmError, read_pnm, write_pnm
from fdp.data.manifest import Manifest, ManifestRow
from fdp.data.sampling import (
    eval_crop_origin,
    preprocess_clip,
    sample_clip_indices,
    sample_offset_range,
    train_crop_origin,
)
from fdp.data.synth import SynthSpec, synth_generate
from fdp.data.loader import ClipStore

__all__ = [
    "PnmError",
    "TruncatedPnmError",
    "read_pnm",
    "write_pnm",
    "Manifest",
    "ManifestRow",
    "sample_clip_indices",
    "sample_offset_range",
    "train_crop_origin",
    "eval_crop_origin",
    "preprocess_clip",
    "SynthSpec",
    "synth_generate",
    "ClipStore",
]
