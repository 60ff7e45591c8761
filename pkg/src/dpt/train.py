"""Plain SGD and a single-sample overfit loop for smoke testing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .losses import masked_mse_loss, segmentation_loss
from .model import DPT
from .tensor import no_grad


def sgd_step(params: dict, lr: float, clip_norm: float | None = None) -> float:
    """Update ``p -= lr * grad`` in place; returns the pre-clip gradient norm."""
    grads = [p.grad for p in params.values() if p.grad is not None]
    norm = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads)))
    scale = lr
    if clip_norm is not None and norm > clip_norm:
        scale = lr * clip_norm / norm
    for p in params.values():
        if p.grad is not None:
            p.data -= (scale * p.grad).astype(p.dtype)
            p.grad = None
    return norm


def synthetic_depth_sample(size: int = 64, dtype=np.float32):
    """A smooth RGB-like input and a positive inverse-depth target."""
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1.0)
    image = np.stack([np.sin(6 * xx), np.cos(5 * yy), xx * yy]).astype(dtype)
    target = 0.3 + 0.5 * yy + 0.2 * np.exp(-((xx - 0.5) ** 2 + (yy - 0.5) ** 2) / 0.05)
    return image, target.astype(dtype)


@dataclass
class TrainLog:
    losses: list = field(default_factory=list)

    @property
    def final(self) -> float:
        return self.losses[-1]


def overfit(
    model: DPT,
    image: np.ndarray,
    target: np.ndarray,
    steps: int = 500,
    lr: float = 0.02,
    clip_norm: float = 1.0,
    warmup: int = 50,
    mask: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> TrainLog:
    """Fit one sample with SGD; depth uses masked MSE, segmentation CE (+ aux)."""
    params = model.trainable()
    log = TrainLog()
    for step in range(steps):
        out = model.forward(image, training=True, rng=rng)
        if model.cfg.head == "depth":
            loss = masked_mse_loss(out.prediction, target, mask)
        else:
            loss = segmentation_loss(out.prediction, out.aux_logits, target, aux_weight=model.cfg.aux_weight)
        loss.backward()
        log.losses.append(loss.item())
        sgd_step(params, lr * min(1.0, (step + 1) / max(warmup, 1)), clip_norm)
    with no_grad():
        final = model.forward(image)
        if model.cfg.head == "depth":
            log.losses.append(masked_mse_loss(final.prediction, target, mask).item())
        else:
            log.losses.append(segmentation_loss(final.prediction, None, target).item())
    return log
