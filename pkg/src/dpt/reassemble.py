"""Reassemble: tokens to image-like feature maps (Read, Concatenate, Resample)."""

from __future__ import annotations

import numpy as np

from . import functional as F
from .config import VALID_SCALES
from .encoder import TokenSet
from .params import hook_stride
from .tensor import Tensor, concatenate


def read(t: TokenSet, mode: str, params: dict | None = None, prefix: str | None = None) -> Tensor:
    """Map ``N_p + 1`` tokens to ``N_p`` by handling the readout token."""
    tokens = t.tokens
    patches = tokens[1:]
    if mode == "ignore":
        return patches
    readout = tokens[0:1]
    if mode == "add":
        return patches + readout
    if mode == "project":
        key = f"{prefix}.readout.weight"
        if params is None or key not in params:
            raise KeyError(f"project readout needs weights {key!r}")
        n = patches.shape[0]
        spread = Tensor(np.zeros((n, 1), dtype=tokens.dtype)) + readout
        joined = concatenate([patches, spread], axis=1)
        return F.gelu(F.linear(joined, params[key], params[f"{prefix}.readout.bias"]))
    raise ValueError(f"unknown readout mode {mode!r}")


def concatenate_tokens(rows: Tensor, grid: tuple) -> Tensor:
    """Place row ``y * w + x`` at pixel ``(y, x)``: ``N_p x D`` to ``D x h x w``."""
    h, w = grid
    n, d = rows.shape
    if n != h * w:
        raise ValueError(f"{n} rows cannot fill a {h}x{w} grid")
    return rows.reshape(h, w, d).transpose(2, 0, 1)


def resample(f: Tensor, src_stride: int, scale: int, params: dict, prefix: str, has_adapter: bool = False) -> Tensor:
    """Project with a 1x1 conv, then resize from ``1/src_stride`` to ``1/scale``.

    ``scale >= src_stride`` uses a 3x3 conv with stride ``scale / src_stride``;
    smaller scales use a 3x3 transpose conv with stride ``src_stride / scale``.
    """
    if scale not in VALID_SCALES:
        raise ValueError(f"scale {scale} not in {VALID_SCALES}")
    hi, lo = max(scale, src_stride), min(scale, src_stride)
    if hi % lo:
        raise ValueError(f"scale {scale} and source stride {src_stride} have no integer ratio")
    x = F.conv2d(f, params[f"{prefix}.project.weight"], params[f"{prefix}.project.bias"])
    w, b = params[f"{prefix}.resample.weight"], params[f"{prefix}.resample.bias"]
    if scale >= src_stride:
        x = F.conv2d(x, w, b, stride=scale // src_stride, padding=1)
    else:
        r = src_stride // scale
        x = F.conv_transpose2d(x, w, b, stride=r, padding=1, output_padding=r - 1)
    if has_adapter:
        x = F.conv2d(x, params[f"{prefix}.adapter.weight"], None, padding=1)
    return x


def reassemble(hook, i: int, cfg, params: dict) -> Tensor:
    prefix = f"reassemble.{i}"
    if isinstance(hook, TokenSet):
        rows = read(hook, cfg.readout, params, prefix)
        fmap = concatenate_tokens(rows, hook.grid)
    else:
        fmap = hook
    return resample(
        fmap, hook_stride(cfg, i), cfg.scales[i], params, prefix, has_adapter=cfg.reassemble_widths is not None
    )


def reassemble_all(hooks: list, cfg, params: dict) -> list:
    """Four ``D_hat``-channel maps at 1/4, 1/8, 1/16 and 1/32 resolution."""
    if len(hooks) != 4:
        raise ValueError(f"expected 4 hooks, got {len(hooks)}")
    return [reassemble(h, i, cfg, params) for i, h in enumerate(hooks)]
