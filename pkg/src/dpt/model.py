"""Full dense prediction transformer: encoder, reassemble, fusion, head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DECODER_STRIDE, DptConfig, parse_config
from .encoder import encode
from .fusion import decode
from .heads import aux_segmentation_head, depth_head, segmentation_head
from .params import init_params, param_plan
from .reassemble import reassemble_all
from .tensor import Tensor, no_grad


class ShapeError(ValueError):
    pass


def check_input_size(h: int, w: int) -> None:
    if h % DECODER_STRIDE or w % DECODER_STRIDE:
        raise ShapeError(f"input {h}x{w} is not divisible by {DECODER_STRIDE}")


@dataclass
class DptOutput:
    prediction: Tensor  # H x W inverse depth, or C x H x W logits
    aux_logits: Tensor | None = None
    hooks: list | None = None
    pyramid: list | None = None
    decoded: Tensor | None = None
    penultimate: Tensor | None = None


class DPT:
    """A model instance: configuration plus a flat dict of named parameters."""

    def __init__(self, cfg: DptConfig | str | dict, params: dict | None = None, seed: int = 0, dtype=np.float32):
        self.cfg = parse_config(cfg)
        self.params = params if params is not None else init_params(self.cfg, seed=seed, dtype=dtype)
        plan = param_plan(self.cfg)
        if set(plan) != set(self.params):
            missing = sorted(set(plan) - set(self.params))
            extra = sorted(set(self.params) - set(plan))
            raise KeyError(f"parameter set does not match config (missing {missing[:3]}, extra {extra[:3]})")

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype

    def trainable(self) -> dict[str, Tensor]:
        plan = param_plan(self.cfg)
        return {k: v for k, v in self.params.items() if plan[k].trainable}

    def num_parameters(self) -> int:
        return sum(t.size for t in self.trainable().values())

    def normalize(self, image: np.ndarray) -> np.ndarray:
        """Scale an 8-bit-range ``3 x H x W`` image to the network's input range."""
        mean = np.asarray(self.cfg.norm_mean, dtype=np.float64)[:, None, None]
        std = np.asarray(self.cfg.norm_std, dtype=np.float64)[:, None, None]
        return ((np.asarray(image, dtype=np.float64) / 255.0 - mean) / std).astype(self.dtype)

    def forward(
        self,
        image: Tensor | np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
        keep_intermediates: bool = False,
    ) -> DptOutput:
        if not isinstance(image, Tensor):
            image = Tensor(np.asarray(image, dtype=self.dtype))
        if image.ndim != 3 or image.shape[0] != 3:
            raise ShapeError(f"expected a 3 x H x W image, got {image.shape}")
        _, h, w = image.shape
        check_input_size(h, w)
        cfg = self.cfg
        hooks = encode(image, cfg, self.params)
        pyramid = reassemble_all(hooks, cfg, self.params)
        decoded, penultimate = decode(pyramid, self.params, cfg.use_batchnorm, training)
        aux = None
        if cfg.head == "depth":
            pred = depth_head(decoded, self.params)
        else:
            kwargs = dict(training=training, dropout=cfg.dropout, rng=rng)
            pred = segmentation_head(decoded, self.params, (h, w), **kwargs)
            if cfg.aux_head:
                aux = aux_segmentation_head(penultimate, self.params, (h, w), **kwargs)
        out = DptOutput(pred, aux)
        if keep_intermediates:
            out.hooks, out.pyramid, out.decoded, out.penultimate = hooks, pyramid, decoded, penultimate
        return out

    __call__ = forward

    def predict(self, image: np.ndarray) -> np.ndarray:
        """Inference without gradient tracking; returns a numpy array."""
        with no_grad():
            return self.forward(image).prediction.data

    def astype(self, dtype) -> "DPT":
        params = {k: Tensor(v.data.astype(dtype), requires_grad=v.requires_grad, name=k) for k, v in self.params.items()}
        return DPT(self.cfg, params)
