"""Minimal training losses (segmentation cross-entropy, masked MSE)."""

from __future__ import annotations

import numpy as np

from . import functional as F
from .config import AUX_LOSS_WEIGHT
from .tensor import Tensor


def cross_entropy_loss(logits: Tensor, labels: np.ndarray, ignore_label: int = 255) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``C x H x W`` logits."""
    labels = np.asarray(labels)
    if labels.shape != logits.shape[1:]:
        raise ValueError(f"labels {labels.shape} do not match logits {logits.shape}")
    valid = labels != ignore_label
    if not valid.any():
        raise ValueError("every pixel is ignored")
    if labels[valid].min() < 0 or labels[valid].max() >= logits.shape[0]:
        raise ValueError("label outside [0, num_classes)")
    logp = F.log_softmax(logits, axis=0)
    ys, xs = np.nonzero(valid)
    picked = logp[labels[ys, xs], ys, xs]
    return -picked.mean()


def segmentation_loss(
    main_logits: Tensor,
    aux_logits: Tensor | None,
    labels: np.ndarray,
    ignore_label: int = 255,
    aux_weight: float = AUX_LOSS_WEIGHT,
) -> Tensor:
    """``CE(main) + aux_weight * CE(aux)``."""
    loss = cross_entropy_loss(main_logits, labels, ignore_label)
    if aux_logits is not None and aux_weight != 0.0:
        loss = loss + aux_weight * cross_entropy_loss(aux_logits, labels, ignore_label)
    return loss


def masked_mse_loss(pred: Tensor, target, mask=None) -> Tensor:
    target = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=pred.dtype)
    if target.shape != pred.shape:
        raise ValueError(f"target {target.shape} does not match prediction {pred.shape}")
    mask = np.ones(pred.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("mask selects no pixels")
    diff = (pred - Tensor(target)) * Tensor(mask.astype(pred.dtype))
    return (diff * diff).sum() * (1.0 / n)
