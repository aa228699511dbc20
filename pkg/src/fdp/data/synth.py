"""Deterministic synthetic micro-motion dataset.

Each clip shows a static per-subject background texture with a small
bright Gaussian blob drifting along a class-specific direction (class j
drifts at angle 2*pi*j/m) for a total displacement of `amplitude`
pixels across the clip, under per-frame Gaussian pixel noise. Appearance
carries no class information; only the motion direction does, so with
amplitude 0 the classes are statistically indistinguishable.

Everything derives from the spec seed through named SeedSequence spawns,
so regeneration is byte-identical.
"""

import os
from dataclasses import dataclass

import numpy as np

from fdp.data.manifest import Manifest, ManifestRow
from fdp.data.pnm import write_pnm

BLOB_SIGMA = 5.0
BLOB_GAIN = (0.40, 0.36, 0.32)  # per-channel bump height, class-independent
START_JITTER = 4  # px, blob start scatter around frame center
TEXTURE_GRID = 9


@dataclass
class SynthSpec:
    num_subjects: int = 6
    num_classes: int = 3
    clips_per_cell: int = 4
    frames_per_clip: int = 24
    frame_size: int = 72
    amplitude: float = 2.5
    noise: float = 0.02
    seed: int = 0

    def validate(self):
        for name in ("num_subjects", "num_classes", "clips_per_cell", "frames_per_clip"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.amplitude < 0 or self.noise < 0:
            raise ValueError("amplitude and noise must be nonnegative")
        if self.amplitude > self.frame_size / 4:
            raise ValueError("amplitude too large for the micro-motion regime")
        return self


def _bilinear_upsample(coarse, size):
    g = coarse.shape[-1]
    xs = np.linspace(0.0, g - 1.0, size)
    i0 = np.floor(xs).astype(int)
    i1 = np.minimum(i0 + 1, g - 1)
    f = xs - i0
    rows = coarse[:, i0, :] * (1 - f)[None, :, None] + coarse[:, i1, :] * f[None, :, None]
    return rows[:, :, i0] * (1 - f)[None, None, :] + rows[:, :, i1] * f[None, None, :]


def _subject_background(spec, subject_idx):
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, 101, subject_idx])
    )
    coarse = rng.uniform(0.25, 0.65, size=(3, TEXTURE_GRID, TEXTURE_GRID))
    return _bilinear_upsample(coarse, spec.frame_size)


def _blob(size, cy, cx):
    ys = np.arange(size)[:, None] - cy
    xs = np.arange(size)[None, :] - cx
    return np.exp(-(ys**2 + xs**2) / (2.0 * BLOB_SIGMA**2))


def render_clip(spec, subject_idx, class_idx, clip_idx):
    """Frames (L, 3, S, S) in [0, 1] for one synthetic clip."""
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, 202, subject_idx, class_idx, clip_idx])
    )
    background = _subject_background(spec, subject_idx)
    size = spec.frame_size
    length = spec.frames_per_clip
    angle = 2.0 * np.pi * class_idx / spec.num_classes
    direction = np.array([np.sin(angle), np.cos(angle)])  # (dy, dx)
    start = size / 2.0 + rng.uniform(-START_JITTER, START_JITTER, size=2)

    frames = np.empty((length, 3, size, size), dtype=np.float64)
    for k in range(length):
        progress = k / (length - 1) if length > 1 else 0.0
        cy, cx = start + direction * (spec.amplitude * progress)
        bump = _blob(size, cy, cx)
        frame = background + bump[None, :, :] * np.asarray(BLOB_GAIN)[:, None, None]
        if spec.noise > 0:
            frame = frame + rng.normal(0.0, spec.noise, size=frame.shape)
        frames[k] = np.clip(frame, 0.0, 1.0)
    return frames


def synth_generate(spec, out_dir):
    """Write frames and manifest under out_dir; returns the manifest path."""
    spec.validate()
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for si in range(spec.num_subjects):
        for ci in range(spec.num_classes):
            for ki in range(spec.clips_per_cell):
                clip_id = f"s{si:02d}_c{ci}_k{ki}"
                frame_dir = os.path.join("frames", clip_id)
                full_dir = os.path.join(out_dir, frame_dir)
                os.makedirs(full_dir, exist_ok=True)
                frames = render_clip(spec, si, ci, ki)
                for k, frame in enumerate(frames):
                    write_pnm(os.path.join(full_dir, f"frame_{k:04d}.ppm"), frame)
                rows.append(
                    ManifestRow(clip_id, f"s{si:02d}", ci, frame_dir, len(frames))
                )
    class_names = [f"motion_{j}" for j in range(spec.num_classes)]
    manifest = Manifest(rows, class_names, root=out_dir)
    path = os.path.join(out_dir, "manifest.csv")
    manifest.save(path)
    return path
