"""Dataset manifest: one CSV row per clip plus a class-name table.

Layout on disk:
    <root>/manifest.csv    header `clip_id,subject_id,label,frame_dir,num_frames`
    <root>/classes.txt     one class name per line, index = label
    <frame_dir>/frame_0000.ppm ...
"""

import os
from dataclasses import dataclass

HEADER = "clip_id,subject_id,label,frame_dir,num_frames"


@dataclass
class ManifestRow:
    clip_id: str
    subject_id: str
    label: int
    frame_dir: str
    num_frames: int


class Manifest:
    def __init__(self, rows, class_names, root="."):
        self.rows = list(rows)
        self.class_names = list(class_names)
        self.root = root
        ids = [r.clip_id for r in self.rows]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate clip_id in manifest")
        for r in self.rows:
            if not 0 <= r.label < len(self.class_names):
                raise ValueError(
                    f"clip {r.clip_id}: label {r.label} outside "
                    f"[0, {len(self.class_names)})"
                )

    @property
    def num_classes(self):
        return len(self.class_names)

    def subjects(self):
        return sorted({r.subject_id for r in self.rows})

    def frame_path(self, row, k):
        return os.path.join(self.root, row.frame_dir, f"frame_{k:04d}.ppm")

    @classmethod
    def load(cls, path):
        root = os.path.dirname(os.path.abspath(path))
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
        if not lines or lines[0] != HEADER:
            raise ValueError(f"{path}: missing or wrong manifest header")
        rows = []
        for ln in lines[1:]:
            if not ln:
                continue
            parts = ln.split(",")
            if len(parts) != 5:
                raise ValueError(f"{path}: malformed row {ln!r}")
            rows.append(
                ManifestRow(parts[0], parts[1], int(parts[2]), parts[3], int(parts[4]))
            )
        classes_path = os.path.join(root, "classes.txt")
        with open(classes_path, "r", encoding="utf-8") as fh:
            class_names = [ln.strip() for ln in fh if ln.strip()]
        return cls(rows, class_names, root=root)

    def save(self, path):
        root = os.path.dirname(os.path.abspath(path))
        os.makedirs(root, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(HEADER + "\n")
            for r in self.rows:
                fh.write(
                    f"{r.clip_id},{r.subject_id},{r.label},{r.frame_dir},{r.num_frames}\n"
                )
        with open(os.path.join(root, "classes.txt"), "w", encoding="utf-8") as fh:
            for name in self.class_names:
                fh.write(name + "\n")

    def subset(self, clip_ids):
        wanted = set(clip_ids)
        return Manifest(
            [r for r in self.rows if r.clip_id in wanted], self.class_names, self.root
        )
