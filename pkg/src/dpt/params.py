"""Parameter plans: names, shapes and initialisation for a configuration.

A plan is computed from the configuration alone, so parameter counts never
require materialising weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEPTH_HEAD_HIDDEN, DptConfig
from .tensor import Tensor


@dataclass(frozen=True)
class ParamSpec:
    shape: tuple
    init: str  # trunc_normal | he | he_t | zeros | ones
    trainable: bool = True

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))


def _linear(plan, prefix, d_in, d_out, bias=True):
    plan[f"{prefix}.weight"] = ParamSpec((d_in, d_out), "trunc_normal")
    if bias:
        plan[f"{prefix}.bias"] = ParamSpec((d_out,), "zeros")


def _conv(plan, prefix, c_in, c_out, k, bias=True):
    plan[f"{prefix}.weight"] = ParamSpec((c_out, c_in, k, k), "he")
    if bias:
        plan[f"{prefix}.bias"] = ParamSpec((c_out,), "zeros")


def _conv_t(plan, prefix, c_in, c_out, k, bias=True):
    plan[f"{prefix}.weight"] = ParamSpec((c_in, c_out, k, k), "he_t")
    if bias:
        plan[f"{prefix}.bias"] = ParamSpec((c_out,), "zeros")


def _norm(plan, prefix, dim):
    plan[f"{prefix}.gamma"] = ParamSpec((dim,), "ones")
    plan[f"{prefix}.beta"] = ParamSpec((dim,), "zeros")


def _batchnorm(plan, prefix, dim):
    _norm(plan, prefix, dim)
    plan[f"{prefix}.running_mean"] = ParamSpec((dim,), "zeros", trainable=False)
    plan[f"{prefix}.running_var"] = ParamSpec((dim,), "ones", trainable=False)


def transformer_layer_plan(plan: dict, prefix: str, dim: int, hidden: int) -> None:
    _norm(plan, f"{prefix}.ln1", dim)
    _linear(plan, f"{prefix}.attn.qkv", dim, 3 * dim)
    _linear(plan, f"{prefix}.attn.proj", dim, dim)
    _norm(plan, f"{prefix}.ln2", dim)
    _linear(plan, f"{prefix}.mlp.fc1", dim, hidden)
    _linear(plan, f"{prefix}.mlp.fc2", hidden, dim)


def hybrid_plan(plan: dict, cfg: DptConfig) -> None:
    h = cfg.hybrid
    plan["encoder.hybrid.stem.weight"] = ParamSpec((h.stem_channels, 3, 7, 7), "he")
    c_in = h.stem_channels
    for s, (blocks, c_out) in enumerate(zip(h.block_counts, h.stage_channels)):
        mid = c_out // 4
        for b in range(blocks):
            p = f"encoder.hybrid.stages.{s}.blocks.{b}"
            _norm(plan, f"{p}.gn1", c_in)
            _conv(plan, f"{p}.conv1", c_in, mid, 1, bias=False)
            _norm(plan, f"{p}.gn2", mid)
            _conv(plan, f"{p}.conv2", mid, mid, 3, bias=False)
            _norm(plan, f"{p}.gn3", mid)
            _conv(plan, f"{p}.conv3", mid, c_out, 1, bias=False)
            if b == 0:
                _conv(plan, f"{p}.downsample", c_in, c_out, 1, bias=False)
            c_in = c_out
    _linear(plan, "encoder.hybrid.proj", c_in, cfg.encoder.embed_dim)


def encoder_plan(plan: dict, cfg: DptConfig) -> None:
    enc = cfg.encoder
    d = enc.embed_dim
    if enc.embedder == "patch":
        _linear(plan, "encoder.patch_embed", 3 * enc.patch_size**2, d)
    else:
        hybrid_plan(plan, cfg)
    plan["encoder.cls_token"] = ParamSpec((1, d), "trunc_normal")
    n = enc.pos_grid[0] * enc.pos_grid[1]
    plan["encoder.pos_embed"] = ParamSpec((n + 1, d), "trunc_normal")
    for i in range(enc.depth):
        transformer_layer_plan(plan, f"encoder.blocks.{i}", d, enc.hidden_dim)


def hook_channels(cfg: DptConfig, i: int) -> int:
    """Channel count of hook ``i`` as it enters Reassemble."""
    hook = cfg.encoder.hooks[i]
    if hook == "R0":
        return cfg.hybrid.stage_channels[0]
    if hook == "R1":
        return cfg.hybrid.stage_channels[1]
    return cfg.encoder.embed_dim


def hook_stride(cfg: DptConfig, i: int) -> int:
    hook = cfg.encoder.hooks[i]
    if hook == "R0":
        return 4
    if hook == "R1":
        return 8
    return cfg.encoder.patch_size


def reassemble_plan(plan: dict, cfg: DptConfig) -> None:
    d = cfg.encoder.embed_dim
    for i, s in enumerate(cfg.scales):
        prefix = f"reassemble.{i}"
        is_token = isinstance(cfg.encoder.hooks[i], int)
        if is_token and cfg.readout == "project":
            _linear(plan, f"{prefix}.readout", 2 * d, d)
        width = cfg.stage_width(i)
        _conv(plan, f"{prefix}.project", hook_channels(cfg, i), width, 1)
        src = hook_stride(cfg, i)
        if s >= src:
            _conv(plan, f"{prefix}.resample", width, width, 3)
        else:
            _conv_t(plan, f"{prefix}.resample", width, width, 3)
        if cfg.reassemble_widths is not None:
            _conv(plan, f"{prefix}.adapter", width, cfg.features, 3, bias=False)


def _rcu_plan(plan, prefix, dim, use_bn):
    _conv(plan, f"{prefix}.conv1", dim, dim, 3, bias=not use_bn)
    if use_bn:
        _batchnorm(plan, f"{prefix}.bn1", dim)
    _conv(plan, f"{prefix}.conv2", dim, dim, 3, bias=not use_bn)
    if use_bn:
        _batchnorm(plan, f"{prefix}.bn2", dim)


def fusion_plan(plan: dict, cfg: DptConfig) -> None:
    dim = cfg.features
    for level in reversed(range(4)):
        prefix = f"fusion.{level}"
        if level < 3:
            _rcu_plan(plan, f"{prefix}.rcu1", dim, cfg.use_batchnorm)
        _rcu_plan(plan, f"{prefix}.rcu2", dim, cfg.use_batchnorm)
        _conv(plan, f"{prefix}.out", dim, dim, 1)


def seg_head_plan(plan: dict, prefix: str, dim: int, num_classes: int) -> None:
    _conv(plan, f"{prefix}.conv1", dim, dim, 3, bias=False)
    _batchnorm(plan, f"{prefix}.bn", dim)
    _conv(plan, f"{prefix}.conv2", dim, num_classes, 1)


def head_plan(plan: dict, cfg: DptConfig) -> None:
    dim = cfg.features
    if cfg.head == "depth":
        _conv(plan, "head.conv1", dim, dim // 2, 3)
        _conv(plan, "head.conv2", dim // 2, DEPTH_HEAD_HIDDEN, 3)
        _conv(plan, "head.conv3", DEPTH_HEAD_HIDDEN, 1, 1)
    else:
        seg_head_plan(plan, "head", dim, cfg.num_classes)
        if cfg.aux_head:
            seg_head_plan(plan, "aux_head", dim, cfg.num_classes)


def param_plan(cfg: DptConfig) -> dict[str, ParamSpec]:
    """Ordered mapping of every named array the model owns."""
    plan: dict[str, ParamSpec] = {}
    encoder_plan(plan, cfg)
    reassemble_plan(plan, cfg)
    fusion_plan(plan, cfg)
    head_plan(plan, cfg)
    return plan


def count_parameters(plan: dict[str, ParamSpec], trainable_only: bool = True) -> int:
    return sum(spec.size for spec in plan.values() if spec.trainable or not trainable_only)


def count_by_group(plan: dict[str, ParamSpec]) -> dict[str, int]:
    groups: dict[str, int] = {}
    for name, spec in plan.items():
        if not spec.trainable:
            continue
        key = name.split(".")[0]
        groups[key] = groups.get(key, 0) + spec.size
    return groups


def trunc_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    """Normal samples redrawn until all lie within two standard deviations."""
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return out * std


def _init_array(spec: ParamSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.init == "zeros":
        return np.zeros(spec.shape)
    if spec.init == "ones":
        return np.ones(spec.shape)
    if spec.init == "trunc_normal":
        return trunc_normal(rng, spec.shape, 0.02)
    if spec.init in ("he", "he_t"):
        c = spec.shape[1] if spec.init == "he" else spec.shape[0]
        fan_in = c * spec.shape[2] * spec.shape[3]
        return rng.standard_normal(spec.shape) * np.sqrt(2.0 / fan_in)
    raise ValueError(f"unknown init {spec.init!r}")


def init_params(cfg: DptConfig, seed: int = 0, dtype=np.float32) -> dict[str, Tensor]:
    plan = param_plan(cfg)
    rng = np.random.default_rng(seed)
    params = {}
    for name, spec in plan.items():
        arr = _init_array(spec, rng).astype(dtype)
        params[name] = Tensor(arr, requires_grad=spec.trainable, name=name)
    return params
