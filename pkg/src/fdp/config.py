"""Run configuration: typed defaults, a line-based `key = value` file
format (# comments, unknown keys rejected), and a canonical text form
used for hashing and checkpoint embedding."""

import dataclasses
import hashlib
from dataclasses import dataclass

from fdp.encoder import EncoderConfig
from fdp.heads import HeadConfig


@dataclass
class RunConfig:
    # clip assembly
    t: int = 8
    crop: int = 64
    augment: bool = True
    # loss weights
    lambda_d: float = 100.0
    lambda_r: float = 0.1
    lambda_mer: float = 1.0
    rank_slope: float = 1.0
    # optimization
    learning_rate: float = 1e-4
    batch_size: int = 36
    epochs: int = 100
    seed: int = 0
    deterministic: bool = True
    # classes: 0 means "infer from the manifest at training time"
    num_classes: int = 0
    # frame encoder
    stem_channels: int = 16
    stage_channels: tuple = (32, 64, 128, 256)
    blocks_local: int = 2
    blocks_global: int = 1
    heads: int = 4
    patch_size: int = 2
    mlp_ratio: int = 2
    attn_dropout: float = 0.1
    # heads over the dynamic representation
    temporal_channels: int = 32
    mer_hidden: int = 128
    dic_channels: tuple = (64, 128, 256, 256)
    dic_head_channels: tuple = (64, 32)

    def encoder_config(self):
        return EncoderConfig(
            stem_channels=self.stem_channels,
            stage_channels=tuple(self.stage_channels),
            blocks_local=self.blocks_local,
            blocks_global=self.blocks_global,
            heads=self.heads,
            patch_size=self.patch_size,
            mlp_ratio=self.mlp_ratio,
            attn_dropout=self.attn_dropout,
        )

    def head_config(self, num_classes=None):
        return HeadConfig(
            num_classes=num_classes or self.num_classes,
            temporal_channels=self.temporal_channels,
            mer_hidden=self.mer_hidden,
            dic_channels=tuple(self.dic_channels),
            dic_head_channels=tuple(self.dic_head_channels),
            output_extent=self.crop,
        )

    def validate(self):
        positive = (
            "t", "crop", "lambda_mer", "rank_slope", "learning_rate",
            "batch_size", "epochs", "stem_channels", "heads", "patch_size",
            "mlp_ratio", "temporal_channels", "mer_hidden",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"config: {name} must be positive")
        if self.lambda_d < 0 or self.lambda_r < 0:
            raise ValueError("config: loss weights must be nonnegative")
        if not 0.0 <= self.attn_dropout < 1.0:
            raise ValueError("config: attn_dropout must be in [0, 1)")
        return self


_DEFAULTS = RunConfig()
_KINDS = {
    f.name: type(getattr(_DEFAULTS, f.name)) for f in dataclasses.fields(RunConfig)
}


def _parse_value(name, text, kind):
    text = text.strip()
    if kind is bool:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"config: bad boolean for {name}: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind is tuple:
        return tuple(int(part) for part in text.split(",") if part.strip())
    raise ValueError(f"config: unsupported field type for {name}")


def parse_config(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _KINDS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, val, _KINDS[key])
    return RunConfig(**values).validate()


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg):
    """Canonical text form: every field, declaration order, one per line."""
    lines = []
    for field in dataclasses.fields(RunConfig):
        value = getattr(cfg, field.name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{field.name} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(cfg):
    return hashlib.sha256(format_config(cfg).encode("utf-8")).hexdigest()[:16]
