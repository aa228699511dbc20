"""In-memory clip store and batch assembly for training/evaluation."""

import numpy as np

from fdp.data.pnm import read_pnm
from fdp.data.sampling import (
    eval_crop_origin,
    preprocess_clip,
    sample_clip_indices,
    sample_offset_range,
    train_crop_origin,
)
from fdp.dynimg import dynamic_image


class ClipStore:
    """Loads every frame of a manifest once (uint8) and assembles batches.

    A batch is (clips, labels, targets): clips (B, t, 3, c, c) float32,
    targets the oracle dynamic image of each clip's full cropped frame
    sequence, (B, 1, c, c) float32.
    """

    def __init__(self, manifest):
        self.manifest = manifest
        self.clips = []
        for row in manifest.rows:
            frames = np.stack(
                [
                    np.round(read_pnm(manifest.frame_path(row, k)) * 255).astype(np.uint8)
                    for k in range(row.num_frames)
                ]
            )
            if frames.ndim != 4 or frames.shape[1] != 3:
                raise ValueError(f"clip {row.clip_id}: expected color frames")
            self.clips.append(frames)
        sizes = {c.shape[-1] for c in self.clips}
        if len(sizes) != 1:
            raise ValueError(f"mixed frame extents in dataset: {sorted(sizes)}")
        self.frame_size = sizes.pop()

    def __len__(self):
        return len(self.clips)

    def example(self, index, t, crop, train, rng=None, augment=True):
        """One preprocessed clip: (frames (t,3,c,c), label, target (1,c,c))."""
        raw = self.clips[index].astype(np.float32) / 255.0
        length = raw.shape[0]
        if train and augment:
            offset = int(rng.integers(0, sample_offset_range(length, t) + 1))
            oy = train_crop_origin(self.frame_size, crop, rng)
            ox = train_crop_origin(self.frame_size, crop, rng)
            flip = bool(rng.random() < 0.5)
        else:
            offset = 0
            oy = ox = eval_crop_origin(self.frame_size, crop)
            flip = False
        processed = preprocess_clip(raw, crop, oy, ox, flip)
        indices = sample_clip_indices(length, t, offset)
        target = dynamic_image(processed).astype(np.float32)[None]
        return processed[indices], self.manifest.rows[index].label, target

    def batch(self, indices, t, crop, train, rng=None, augment=True):
        clips, labels, targets = [], [], []
        for i in indices:
            frames, label, target = self.example(i, t, crop, train, rng, augment)
            clips.append(frames)
            labels.append(label)
            targets.append(target)
        return (
            np.stack(clips),
            np.asarray(labels, dtype=np.int64),
            np.stack(targets),
        )
