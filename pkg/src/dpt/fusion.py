"""RefineNet-style fusion decoder."""

from __future__ import annotations

from . import functional as F
from .tensor import Tensor


def _bn(x: Tensor, params: dict, prefix: str, training: bool) -> Tensor:
    return F.batch_norm(
        x,
        params[f"{prefix}.gamma"],
        params[f"{prefix}.beta"],
        params[f"{prefix}.running_mean"].data,
        params[f"{prefix}.running_var"].data,
        training=training,
    )


def residual_conv_unit(x: Tensor, params: dict, prefix: str, use_bn: bool = False, training: bool = False) -> Tensor:
    """ReLU, conv3x3 (BN), ReLU, conv3x3 (BN), plus the identity skip."""
    w1 = params[f"{prefix}.conv1.weight"]
    if w1.shape[1] != x.shape[0]:
        raise ValueError(f"RCU expects {w1.shape[1]} channels, got {x.shape[0]}")
    h = F.conv2d(x.relu(), w1, params.get(f"{prefix}.conv1.bias"), padding=1)
    if use_bn:
        h = _bn(h, params, f"{prefix}.bn1", training)
    h = F.conv2d(h.relu(), params[f"{prefix}.conv2.weight"], params.get(f"{prefix}.conv2.bias"), padding=1)
    if use_bn:
        h = _bn(h, params, f"{prefix}.bn2", training)
    return h + x


def fusion_block(
    deeper: Tensor,
    skip: Tensor | None,
    params: dict,
    prefix: str,
    use_bn: bool = False,
    training: bool = False,
) -> Tensor:
    """Fuse ``skip`` into ``deeper``, refine, upsample x2 and project (1x1)."""
    x = deeper
    if skip is not None:
        if skip.shape != deeper.shape:
            raise ValueError(f"skip {skip.shape} does not match deeper map {deeper.shape}")
        x = x + residual_conv_unit(skip, params, f"{prefix}.rcu1", use_bn, training)
    x = residual_conv_unit(x, params, f"{prefix}.rcu2", use_bn, training)
    x = F.upsample2x(x)
    return F.conv2d(x, params[f"{prefix}.out.weight"], params[f"{prefix}.out.bias"])


def decode(maps: list, params: dict, use_bn: bool = False, training: bool = False):
    """Fuse a shallow-to-deep pyramid; return ``(output, penultimate)``.

    ``output`` is at half the input resolution; ``penultimate`` is the
    output of the second-to-last fusion block (quarter resolution).
    """
    if len(maps) != 4:
        raise ValueError(f"decode expects 4 maps, got {len(maps)}")
    for fine, coarse in zip(maps[:-1], maps[1:]):
        if fine.shape[1:] != (2 * coarse.shape[1], 2 * coarse.shape[2]):
            raise ValueError(f"inconsistent pyramid: {fine.shape} above {coarse.shape}")
    x = fusion_block(maps[3], None, params, "fusion.3", use_bn, training)
    x = fusion_block(x, maps[2], params, "fusion.2", use_bn, training)
    penultimate = fusion_block(x, maps[1], params, "fusion.1", use_bn, training)
    out = fusion_block(penultimate, maps[0], params, "fusion.0", use_bn, training)
    return out, penultimate
