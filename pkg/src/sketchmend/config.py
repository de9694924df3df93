"""Run configuration: dataclasses plus a small `key = value` file format.

Config files are plain text, one dotted key per line::

    # comment
    net.resolution = 64
    train.steps = 4000
    warp.area_frac = 0.05, 0.25

Booleans are true/false, tuples are comma separated, strings are bare.
Unknown keys are rejected so typos fail loudly before a long run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import get_args, get_origin

from .sketchgen import EdgeConfig
from .warp import DropoutConfig, WarpConfig


class ConfigError(ValueError):
    """Invalid configuration file, key, or value."""


ABLATIONS = ("none", "no_mask", "rule_mask", "no_style")


@dataclass(frozen=True)
class NetConfig:
    """Architecture knobs shared by every network in the model."""

    resolution: int = 64
    base_width: int = 24
    style_dim: int = 128
    coarse_depth: int = 2  # dilated blocks at the coarse bottleneck
    refine_depth: int = 2

    def __post_init__(self):
        if self.style_dim < 8:
            raise ConfigError(f"style_dim must be >= 8, got {self.style_dim}")
        if self.resolution % 16 != 0:
            raise ConfigError(f"resolution must be a multiple of 16, got {self.resolution}")
        if self.base_width < 4:
            raise ConfigError(f"base_width must be >= 4, got {self.base_width}")
        if self.coarse_depth < 1 or self.refine_depth < 1:
            raise ConfigError("coarse/refine depth must be >= 1")

    @property
    def bottleneck(self) -> int:
        return self.resolution // 8


@dataclass(frozen=True)
class OptimConfig:
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch_size: int = 8


@dataclass(frozen=True)
class LossWeights:
    """Scalar weights for ablations; the defaults keep the plain unweighted sum."""

    w_r: float = 1.0
    w_g: float = 1.0
    w_bmr: float = 1.0


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 4000
    seed: int = 0
    log_every: int = 25
    ckpt_every: int = 1000
    ablation: str = "none"
    min_sketch_px: int = 12
    # steps during which blending uses the known warp region instead of the
    # predicted mask (and only the aux half of the mask regularization is
    # applied): the generator learns in-region synthesis first, so the blend
    # pressure cannot collapse the mask to all-zeros before it is useful
    mask_warmup: int = 0
    # steps after warmup over which the blend mask ramps linearly from the
    # known region to the prediction; an abrupt hand-over lets "close every
    # mask" dominate the gradient before per-pixel structure can form
    mask_ramp: int = 0
    # keep the adversarial term in the generator objective during warmup;
    # off = pure-reconstruction warmup (the discriminator still trains)
    warmup_gan: bool = True

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.steps < 0 or self.mask_warmup < 0 or self.mask_ramp < 0:
            raise ConfigError("steps, mask_warmup, and mask_ramp must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    """Everything a training or evaluation run needs, file-loadable."""

    net: NetConfig = NetConfig()
    optim: OptimConfig = OptimConfig()
    weights: LossWeights = LossWeights()
    train: TrainConfig = TrainConfig()
    warp: WarpConfig = WarpConfig()
    dropout: DropoutConfig = DropoutConfig()
    edge: EdgeConfig = EdgeConfig()


def _parse_scalar(text: str, typ):
    text = text.strip()
    if typ is bool:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if typ is int:
        return int(text)
    if typ is float:
        return float(text)
    if typ is str:
        return text
    raise ConfigError(f"unsupported config value type {typ}")


def _parse_value(text: str, typ):
    if get_origin(typ) is tuple:
        parts = [p for p in text.split(",") if p.strip()]
        args = get_args(typ)
        elem = args[0]
        return tuple(_parse_scalar(p, elem) for p in parts)
    return _parse_scalar(text, typ)


def _set_key(sections: dict, dotted: str, raw: str) -> None:
    if "." not in dotted:
        raise ConfigError(f"config keys are section.name, got {dotted!r}")
    section, name = dotted.split(".", 1)
    if section not in sections:
        raise ConfigError(f"unknown config section {section!r}")
    cls = type(sections[section])
    for f in fields(cls):
        if f.name == name:
            try:
                value = _parse_value(raw, _resolve(cls, f.name))
                sections[section] = dataclasses.replace(sections[section], **{name: value})
            except (TypeError, ValueError) as e:
                raise ConfigError(f"bad value for {dotted}: {e}") from e
            return
    raise ConfigError(f"unknown key {name!r} in section {section!r}")


def _resolve(cls, name):
    import typing

    return typing.get_type_hints(cls)[name]


def apply_overrides(cfg: RunConfig, pairs: list[str]) -> RunConfig:
    """Apply `section.key=value` strings on top of a config (flags win)."""
    sections = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override must look like section.key=value, got {pair!r}")
        dotted, raw = pair.split("=", 1)
        _set_key(sections, dotted.strip(), raw)
    return RunConfig(**sections)


def load_config(path) -> RunConfig:
    """Parse a key-value config file into a validated RunConfig."""
    text = Path(path).read_text()
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = body.split("=", 1)
        pairs.append(f"{key.strip()}={raw}")
    return apply_overrides(RunConfig(), pairs)


def dump_config(cfg: RunConfig) -> str:
    """Render a RunConfig back to the file format (defaults included)."""
    lines = []
    for sec in fields(cfg):
        obj = getattr(cfg, sec.name)
        for f in fields(obj):
            val = getattr(obj, f.name)
            if isinstance(val, tuple):
                text = ", ".join(str(v) for v in val)
            else:
                text = str(val)
            lines.append(f"{sec.name}.{f.name} = {text}")
    return "\n".join(lines) + "\n"
