"""Convolutional (hybrid) embedder: a pre-activation ResNet with GN and WS.

The stem halves the resolution; each of the three following stages halves
it again, giving R0 at 1/4, R1 at 1/8 and the token grid at 1/16.
"""

from __future__ import annotations

from . import functional as F
from .encoder import add_readout_and_position
from .tensor import Tensor

TOKEN_STRIDE = 16


def group_count(channels: int, groups: int) -> int:
    """Largest divisor of ``channels`` not exceeding ``groups``."""
    g = min(groups, channels)
    while channels % g:
        g -= 1
    return g


def ws_conv(x: Tensor, weight: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    return F.conv2d(x, F.weight_standardize(weight), None, stride=stride, padding=padding)


def _gn(x: Tensor, params: dict, prefix: str, groups: int) -> Tensor:
    c = x.shape[0]
    return F.group_norm(x, group_count(c, groups), params[f"{prefix}.gamma"], params[f"{prefix}.beta"])


def bottleneck(x: Tensor, params: dict, prefix: str, stride: int, groups: int, first: bool) -> Tensor:
    """Pre-activation bottleneck: GN-ReLU-conv1x1, GN-ReLU-conv3x3, GN-ReLU-conv1x1."""
    pre = _gn(x, params, f"{prefix}.gn1", groups).relu()
    shortcut = ws_conv(pre, params[f"{prefix}.downsample.weight"], stride=stride) if first else x
    h = ws_conv(pre, params[f"{prefix}.conv1.weight"])
    h = _gn(h, params, f"{prefix}.gn2", groups).relu()
    h = ws_conv(h, params[f"{prefix}.conv2.weight"], stride=stride, padding=1)
    h = _gn(h, params, f"{prefix}.gn3", groups).relu()
    h = ws_conv(h, params[f"{prefix}.conv3.weight"])
    return h + shortcut


def embed_hybrid(image: Tensor, cfg, params: dict):
    """Return ``(R0, R1, tokens)`` for a ``3 x H x W`` image."""
    _, h, w = image.shape
    if h % TOKEN_STRIDE or w % TOKEN_STRIDE:
        raise ValueError(f"image {h}x{w} is not divisible by {TOKEN_STRIDE}")
    hc = cfg.hybrid
    x = ws_conv(image, params["encoder.hybrid.stem.weight"], stride=2, padding=3)
    outputs = []
    for s, blocks in enumerate(hc.block_counts):
        for b in range(blocks):
            prefix = f"encoder.hybrid.stages.{s}.blocks.{b}"
            x = bottleneck(x, params, prefix, stride=2 if b == 0 else 1, groups=hc.groups, first=b == 0)
        outputs.append(x)
    r0, r1, top = outputs
    c, gh, gw = top.shape
    rows = top.reshape(c, gh * gw).transpose(1, 0)
    rows = F.linear(rows, params["encoder.hybrid.proj.weight"], params["encoder.hybrid.proj.bias"])
    tokens = add_readout_and_position(rows, (gh, gw), cfg.encoder, params)
    return r0, r1, tokens

