"""Task heads mapping half-resolution decoder features to full resolution."""

from __future__ import annotations

import numpy as np

from . import functional as F
from .fusion import _bn
from .tensor import Tensor


def depth_head(f: Tensor, params: dict, prefix: str = "head") -> Tensor:
    """Non-negative inverse depth, ``H x W``, from a ``D_hat x H/2 x W/2`` map."""
    w1 = params[f"{prefix}.conv1.weight"]
    if w1.shape[1] != f.shape[0]:
        raise ValueError(f"depth head expects {w1.shape[1]} channels, got {f.shape[0]}")
    x = F.conv2d(f, w1, params[f"{prefix}.conv1.bias"], padding=1)
    x = F.upsample2x(x)
    x = F.conv2d(x, params[f"{prefix}.conv2.weight"], params[f"{prefix}.conv2.bias"], padding=1).relu()
    x = F.conv2d(x, params[f"{prefix}.conv3.weight"], params[f"{prefix}.conv3.bias"]).relu()
    return x.reshape(x.shape[1], x.shape[2])


def segmentation_head(
    f: Tensor,
    params: dict,
    out_size: tuple,
    prefix: str = "head",
    training: bool = False,
    dropout: float = 0.1,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Per-pixel class logits ``num_classes x H x W``."""
    w1 = params[f"{prefix}.conv1.weight"]
    if w1.shape[1] != f.shape[0]:
        raise ValueError(f"segmentation head expects {w1.shape[1]} channels, got {f.shape[0]}")
    x = F.conv2d(f, w1, None, padding=1)
    x = _bn(x, params, f"{prefix}.bn", training).relu()
    x = F.dropout(x, dropout, rng, training)
    x = F.conv2d(x, params[f"{prefix}.conv2.weight"], params[f"{prefix}.conv2.bias"])
    return F.bilinear_resize(x, out_size[0], out_size[1])


def aux_segmentation_head(penultimate: Tensor | None, params: dict, out_size: tuple, **kwargs) -> Tensor:
    if penultimate is None:
        raise ValueError("auxiliary head needs the penultimate fusion output")
    return segmentation_head(penultimate, params, out_size, prefix="aux_head", **kwargs)
