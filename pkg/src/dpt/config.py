"""Architecture configuration, presets and JSON parsing."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any, Union

Hook = Union[int, str]

READOUT_MODES = ("ignore", "add", "project")
VALID_SCALES = (4, 8, 16, 32)
DECODER_STRIDE = 32
AUX_LOSS_WEIGHT = 0.2
DEPTH_HEAD_HIDDEN = 32


class ConfigError(ValueError):
    pass


@dataclass
class HybridConfig:
    """Pre-activation ResNet embedder (GN + weight standardization).

    ``block_counts`` gives the number of bottleneck blocks for the three
    stages feeding the transformer: outputs at 1/4 (R0), 1/8 (R1) and 1/16
    (tokens) of the input.
    """

    stem_channels: int = 64
    block_counts: tuple = (2, 2, 2)
    stage_channels: tuple = (256, 512, 1024)
    groups: int = 32

    def validate(self) -> None:
        if len(self.block_counts) != 3 or len(self.stage_channels) != 3:
            raise ConfigError("hybrid embedder needs exactly three stages (1/4, 1/8, 1/16)")
        if any(b < 1 for b in self.block_counts):
            raise ConfigError("every hybrid stage needs at least one block")
        if any(c % 4 for c in self.stage_channels):
            raise ConfigError("hybrid stage widths must be divisible by 4 (bottleneck)")


@dataclass
class EncoderConfig:
    patch_size: int = 16
    embed_dim: int = 768
    depth: int = 12
    heads: int = 12
    mlp_ratio: float = 4.0
    hooks: tuple = (3, 6, 9, 12)
    embedder: str = "patch"
    pos_grid: tuple = (24, 24)
    ln_eps: float = 1e-6

    @property
    def hidden_dim(self) -> int:
        return int(round(self.embed_dim * self.mlp_ratio))

    def validate(self) -> None:
        if self.embedder not in ("patch", "hybrid"):
            raise ConfigError(f"unknown embedder {self.embedder!r}")
        if self.embed_dim % self.heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")
        if len(self.hooks) != 4:
            raise ConfigError(f"exactly 4 hooks required, got {len(self.hooks)}")
        layers = [h for h in self.hooks if isinstance(h, int)]
        sentinels = [h for h in self.hooks if not isinstance(h, int)]
        if sentinels:
            if self.embedder != "hybrid":
                raise ConfigError("R0/R1 hooks are only valid with the hybrid embedder")
            if list(self.hooks[: len(sentinels)]) != ["R0", "R1"][: len(sentinels)]:
                raise ConfigError(f"hybrid hooks must start with R0, R1: {self.hooks}")
        if layers != sorted(layers) or len(set(layers)) != len(layers):
            raise ConfigError(f"hooks must be strictly ascending: {self.hooks}")
        if any(not 1 <= h <= self.depth for h in layers):
            raise ConfigError(f"hooks must lie in [1, {self.depth}]: {self.hooks}")


@dataclass
class DptConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    hybrid: HybridConfig | None = None
    readout: str = "project"
    features: int = 256
    scales: tuple = (4, 8, 16, 32)
    reassemble_widths: tuple | None = None
    head: str = "depth"
    num_classes: int = 150
    aux_head: bool = True
    aux_weight: float = AUX_LOSS_WEIGHT
    dropout: float = 0.1
    norm_mean: tuple = (0.5, 0.5, 0.5)
    norm_std: tuple = (0.5, 0.5, 0.5)
    name: str = "custom"

    @property
    def use_batchnorm(self) -> bool:
        return self.head == "segmentation"

    def stage_width(self, i: int) -> int:
        return self.features if self.reassemble_widths is None else self.reassemble_widths[i]

    def validate(self) -> "DptConfig":
        self.encoder.validate()
        if self.encoder.embedder == "hybrid":
            if self.hybrid is None:
                self.hybrid = HybridConfig()
            self.hybrid.validate()
        if self.readout not in READOUT_MODES:
            raise ConfigError(f"readout must be one of {READOUT_MODES}, got {self.readout!r}")
        if len(self.scales) != 4:
            raise ConfigError(f"exactly 4 scales required, got {len(self.scales)}")
        if any(s not in VALID_SCALES for s in self.scales):
            raise ConfigError(f"scales must be drawn from {VALID_SCALES}: {self.scales}")
        if tuple(self.scales) != tuple(sorted(self.scales)):
            raise ConfigError("scales must increase from shallow to deep hooks")
        if tuple(self.scales) != VALID_SCALES:
            # the fusion chain doubles resolution at every stage
            raise ConfigError(f"the fusion decoder requires scales {VALID_SCALES}")
        if self.reassemble_widths is not None and len(self.reassemble_widths) != 4:
            raise ConfigError("reassemble_widths needs 4 entries")
        if self.head not in ("depth", "segmentation"):
            raise ConfigError(f"unknown head {self.head!r}")
        if self.head == "depth" and self.features % 2:
            raise ConfigError("depth head halves the feature width; features must be even")
        if self.head == "segmentation" and self.num_classes < 1:
            raise ConfigError("num_classes must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        p = self.encoder.patch_size
        if DECODER_STRIDE % p and p % DECODER_STRIDE:
            raise ConfigError(f"patch size {p} incompatible with decoder stride {DECODER_STRIDE}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# -- presets ---------------------------------------------------------------


def _base() -> DptConfig:
    return DptConfig(
        encoder=EncoderConfig(embed_dim=768, depth=12, heads=12, hooks=(3, 6, 9, 12)),
        reassemble_widths=(96, 192, 384, 768),
        name="base",
    )


def _large() -> DptConfig:
    return DptConfig(
        encoder=EncoderConfig(embed_dim=1024, depth=24, heads=16, hooks=(5, 12, 18, 24)),
        reassemble_widths=(256, 512, 1024, 1024),
        name="large",
    )


def _hybrid() -> DptConfig:
    return DptConfig(
        encoder=EncoderConfig(embed_dim=768, depth=12, heads=12, hooks=("R0", "R1", 9, 12), embedder="hybrid"),
        hybrid=HybridConfig(stem_channels=64, block_counts=(3, 4, 9), stage_channels=(256, 512, 1024)),
        reassemble_widths=(256, 512, 768, 768),
        name="hybrid",
    )


def _toy() -> DptConfig:
    return DptConfig(
        encoder=EncoderConfig(embed_dim=32, depth=4, heads=4, hooks=(1, 2, 3, 4), pos_grid=(4, 4)),
        features=32,
        name="toy",
    )


def _toy_hybrid() -> DptConfig:
    return DptConfig(
        encoder=EncoderConfig(
            embed_dim=32, depth=4, heads=4, hooks=("R0", "R1", 3, 4), embedder="hybrid", pos_grid=(4, 4)
        ),
        hybrid=HybridConfig(stem_channels=8, block_counts=(1, 1, 1), stage_channels=(16, 32, 64), groups=4),
        features=32,
        name="toy-hybrid",
    )


PRESETS = {
    "base": _base,
    "large": _large,
    "hybrid": _hybrid,
    "toy": _toy,
    "toy-hybrid": _toy_hybrid,
}


def preset(name: str) -> DptConfig:
    try:
        return PRESETS[name.lower()]().validate()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _coerce_hooks(hooks) -> tuple:
    out = []
    for h in hooks:
        if isinstance(h, str) and h.upper() in ("R0", "R1"):
            out.append(h.upper())
        elif isinstance(h, (int, float)) and int(h) == h:
            out.append(int(h))
        elif isinstance(h, str) and h.isdigit():
            out.append(int(h))
        else:
            raise ConfigError(f"invalid hook {h!r}")
    return tuple(out)


def _apply(obj, overrides: dict[str, Any], path: str):
    known = {f.name for f in dataclasses.fields(obj)}
    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown field {path}{key}")
        current = getattr(obj, key)
        if key == "hybrid":
            if value is None:
                obj.hybrid = None
                continue
            target = current if current is not None else HybridConfig()
            if not isinstance(value, dict):
                raise ConfigError("hybrid must be an object")
            _apply(target, value, "hybrid.")
            obj.hybrid = target
        elif dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}{key} must be an object")
            _apply(current, value, f"{path}{key}.")
        elif key == "hooks":
            obj.hooks = _coerce_hooks(value)
        elif isinstance(value, list):
            setattr(obj, key, tuple(value))
        else:
            setattr(obj, key, value)


def parse_config(document: str | dict | DptConfig) -> DptConfig:
    """Build a validated :class:`DptConfig`.

    ``document`` may be a preset name, a JSON string or an already-decoded
    mapping. A mapping may carry ``"preset"`` to start from a preset and
    override individual fields.
    """
    if isinstance(document, DptConfig):
        return document.validate()
    if isinstance(document, str):
        text = document.strip()
        if not text.startswith("{"):
            return preset(text)
        try:
            document = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise ConfigError("config document must be a JSON object or preset name")
    doc = dict(document)
    base_name = doc.pop("preset", None)
    cfg = preset(base_name) if base_name else DptConfig()
    try:
        _apply(cfg, doc, "")
    except (TypeError, AttributeError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def config_to_json(cfg: DptConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2)
