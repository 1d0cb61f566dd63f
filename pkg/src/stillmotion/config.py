"""Generation configuration: defaults, validation, file parsing.

The defaults reproduce the standard setup: 320px prepared sources,
16-frame clips of 112x112 crops, 5 speeds per axis (9 classes over both
axes), a static mask with side ratio drawn from [0.3, 0.5], and
frame-wise color jitter.

Config files are flat ``key = value`` text; ``#`` starts a comment.
Range-valued keys take ``lo:hi`` pairs.  Recognized keys mirror the
GenConfig fields::

    speeds = 5              axis = both
    frames = 16             crop = 112
    source_size = 320       seed = 0
    epoch = 0               input_mode = images
    output_format = png
    mask_enabled = true     mask_ratio = 0.3:0.5
    jitter_enabled = true   jitter_mode = per-frame
    jitter_brightness = 0.6:1.4
    jitter_contrast = 0.6:1.4
    jitter_saturation = 0.6:1.4
    jitter_hue = -0.1:0.1
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .labels import normalize_axis, per_axis_speed_count_to_K

JITTER_MODES = ("per-frame", "per-clip")
INPUT_MODES = ("images", "frame-dirs")
OUTPUT_FORMATS = ("png", "raw")


@dataclass(frozen=True)
class JitterConfig:
    """Color jitter ranges: multiplicative factors in [0, 2], hue shift in turns."""

    brightness: tuple[float, float] = (0.6, 1.4)
    contrast: tuple[float, float] = (0.6, 1.4)
    saturation: tuple[float, float] = (0.6, 1.4)
    hue: tuple[float, float] = (-0.1, 0.1)

    def validate(self) -> None:
        for name in ("brightness", "contrast", "saturation"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo <= hi <= 2.0):
                raise ConfigError(f"jitter {name} range must satisfy 0 <= lo <= hi <= 2, got {lo}:{hi}")
        lo, hi = self.hue
        if not (-0.5 <= lo <= hi <= 0.5):
            raise ConfigError(f"jitter hue range must satisfy -0.5 <= lo <= hi <= 0.5, got {lo}:{hi}")


@dataclass(frozen=True)
class GenConfig:
    speeds: int = 5
    axis: str = "both"
    frames: int = 16
    crop: int = 112
    source_size: int = 320
    mask_enabled: bool = True
    mask_ratio: tuple[float, float] = (0.3, 0.5)
    jitter_enabled: bool = True
    jitter_mode: str = "per-frame"
    jitter: JitterConfig = field(default_factory=JitterConfig)
    seed: int = 0
    epoch: int = 0
    input_mode: str = "images"
    output_format: str = "png"

    @property
    def k(self) -> int:
        return per_axis_speed_count_to_K(self.speeds)

    def validate(self) -> "GenConfig":
        per_axis_speed_count_to_K(self.speeds)
        normalize_axis(self.axis)
        if self.frames < 2:
            raise ConfigError(f"frames must be >= 2, got {self.frames}")
        if self.crop < 1:
            raise ConfigError(f"crop must be >= 1, got {self.crop}")
        if self.crop > self.source_size:
            raise ConfigError(
                f"crop ({self.crop}) must not exceed source_size ({self.source_size})"
            )
        lo, hi = self.mask_ratio
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigError(f"mask_ratio must satisfy 0 < lo <= hi <= 1, got {lo}:{hi}")
        if self.jitter_mode not in JITTER_MODES:
            raise ConfigError(f"jitter_mode must be one of {JITTER_MODES}, got {self.jitter_mode!r}")
        self.jitter.validate()
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.epoch < 0:
            raise ConfigError(f"epoch must be non-negative, got {self.epoch}")
        if self.input_mode not in INPUT_MODES:
            raise ConfigError(f"input_mode must be one of {INPUT_MODES}, got {self.input_mode!r}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(
                f"output_format must be one of {OUTPUT_FORMATS}, got {self.output_format!r}"
            )
        return self

    def to_dict(self) -> dict[str, Any]:
        return {
            "speeds": self.speeds,
            "axis": normalize_axis(self.axis),
            "frames": self.frames,
            "crop": self.crop,
            "source_size": self.source_size,
            "mask": {
                "enabled": self.mask_enabled,
                "ratio_lo": self.mask_ratio[0],
                "ratio_hi": self.mask_ratio[1],
            },
            "jitter": {
                "enabled": self.jitter_enabled,
                "mode": self.jitter_mode,
                "brightness": list(self.jitter.brightness),
                "contrast": list(self.jitter.contrast),
                "saturation": list(self.jitter.saturation),
                "hue": list(self.jitter.hue),
            },
            "seed": self.seed,
            "epoch": self.epoch,
            "input_mode": self.input_mode,
            "output_format": self.output_format,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GenConfig":
        mask = d.get("mask", {})
        jit = d.get("jitter", {})
        jitter = JitterConfig(
            brightness=tuple(jit.get("brightness", (0.6, 1.4))),
            contrast=tuple(jit.get("contrast", (0.6, 1.4))),
            saturation=tuple(jit.get("saturation", (0.6, 1.4))),
            hue=tuple(jit.get("hue", (-0.1, 0.1))),
        )
        return cls(
            speeds=int(d.get("speeds", 5)),
            axis=str(d.get("axis", "both")),
            frames=int(d.get("frames", 16)),
            crop=int(d.get("crop", 112)),
            source_size=int(d.get("source_size", 320)),
            mask_enabled=bool(mask.get("enabled", True)),
            mask_ratio=(float(mask.get("ratio_lo", 0.3)), float(mask.get("ratio_hi", 0.5))),
            jitter_enabled=bool(jit.get("enabled", True)),
            jitter_mode=str(jit.get("mode", "per-frame")),
            jitter=jitter,
            seed=int(d.get("seed", 0)),
            epoch=int(d.get("epoch", 0)),
            input_mode=str(d.get("input_mode", "images")),
            output_format=str(d.get("output_format", "png")),
        )


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean for {key!r}: {raw!r}")


def parse_range(raw: str, key: str) -> tuple[float, float]:
    parts = raw.split(":")
    if len(parts) != 2:
        raise ConfigError(f"{key!r} expects a lo:hi pair, got {raw!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"cannot parse range for {key!r}: {raw!r}") from None


_INT_KEYS = ("speeds", "frames", "crop", "source_size", "seed", "epoch")
_STR_KEYS = ("axis", "jitter_mode", "input_mode", "output_format")
_BOOL_KEYS = ("mask_enabled", "jitter_enabled")
_RANGE_KEYS = ("mask_ratio", "jitter_brightness", "jitter_contrast", "jitter_saturation", "jitter_hue")


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a key = value config file into an override mapping."""
    overrides: dict[str, Any] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key in _INT_KEYS:
            try:
                overrides[key] = int(raw)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: cannot parse integer for {key!r}: {raw!r}") from None
        elif key in _STR_KEYS:
            overrides[key] = raw
        elif key in _BOOL_KEYS:
            overrides[key] = _parse_bool(raw, key)
        elif key in _RANGE_KEYS:
            overrides[key] = parse_range(raw, key)
        else:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
    return overrides


def apply_overrides(config: GenConfig, overrides: dict[str, Any]) -> GenConfig:
    """Apply a flat override mapping (config-file or CLI keys) on top of `config`."""
    jitter_fields = {}
    direct = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key.startswith("jitter_") and key != "jitter_enabled" and key != "jitter_mode":
            jitter_fields[key.removeprefix("jitter_")] = tuple(value)
        else:
            direct[key] = value
    if jitter_fields:
        direct["jitter"] = replace(config.jitter, **jitter_fields)
    if "mask_ratio" in direct:
        direct["mask_ratio"] = tuple(direct["mask_ratio"])
    return replace(config, **direct)
