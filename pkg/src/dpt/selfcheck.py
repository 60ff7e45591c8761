"""Gradient checks for every primitive op and for end-to-end toy losses."""

from __future__ import annotations

import dataclasses

import numpy as np

from . import functional as F
from .config import DptConfig, parse_config
from .encoder import transformer_layer
from .gradcheck import GradcheckReport, gradcheck
from .losses import cross_entropy_loss, masked_mse_loss, segmentation_loss
from .model import DPT
from .params import count_parameters, init_params, param_plan, transformer_layer_plan
from .tensor import Tensor

TOY_PARAMETER_LIMIT = 1_000_000


class ToyGuardError(ValueError):
    pass


def _t(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _weighted_sum(out: Tensor, rng) -> Tensor:
    # random projection so that every output element influences the scalar
    return (out * Tensor(rng.standard_normal(out.shape))).sum()


def primitive_checks(seed: int = 0, tol: float = 1e-4) -> dict[str, GradcheckReport]:
    rng = np.random.default_rng(seed)
    reports = {}

    def run(name, fn, leaves):
        proj_rng = np.random.default_rng(seed + 1)
        weights = None

        def loss():
            nonlocal weights
            out = fn()
            if weights is None:
                weights = Tensor(proj_rng.standard_normal(out.shape))
            return (out * weights).sum()

        reports[name] = gradcheck(loss, leaves, tol=tol)

    a, b = _t(rng, 4, 5), _t(rng, 5, 3)
    run("matmul", lambda: F.matmul(a, b), [a, b])
    x, w, bias = _t(rng, 3, 7, 7), _t(rng, 4, 3, 3, 3, scale=0.5), _t(rng, 4)
    run("conv2d", lambda: F.conv2d(x, w, bias, stride=2, padding=1), [x, w, bias])
    xt, wt, bt = _t(rng, 3, 4, 4), _t(rng, 3, 2, 3, 3, scale=0.5), _t(rng, 2)
    run("conv_transpose2d", lambda: F.conv_transpose2d(xt, wt, bt, stride=2, padding=1, output_padding=1), [xt, wt, bt])
    xr = _t(rng, 2, 3, 4)
    run("bilinear_resize", lambda: F.bilinear_resize(xr, 5, 7), [xr])
    xl, g, be = _t(rng, 3, 6), _t(rng, 6), _t(rng, 6)
    run("layer_norm", lambda: F.layer_norm(xl, g, be), [xl, g, be])
    xs = _t(rng, 3, 5)
    run("softmax", lambda: F.softmax(xs), [xs])
    run("log_softmax", lambda: F.log_softmax(xs, axis=0), [xs])
    xg = _t(rng, 4, 5)
    run("gelu", lambda: F.gelu(xg), [xg])
    xn, gn, bn = _t(rng, 4, 3, 3), _t(rng, 4), _t(rng, 4)
    run("group_norm", lambda: F.group_norm(xn, 2, gn, bn), [xn, gn, bn])
    run(
        "batch_norm",
        lambda: F.batch_norm(xn, gn, bn, np.zeros(4), np.ones(4), training=True),
        [xn, gn, bn],
    )
    ww = _t(rng, 3, 2, 3, 3)
    run("weight_standardize", lambda: F.weight_standardize(ww), [ww])
    xe = Tensor(rng.uniform(0.5, 2.0, (3, 4)), requires_grad=True)
    run("elementwise", lambda: (xe.exp() * xe.log() + xe.sqrt() / xe - xe**2).relu() + xe.abs(), [xe])
    xm = _t(rng, 3, 4)
    run("reductions", lambda: xm.sum(axis=0, keepdims=True) * xm.mean(axis=1, keepdims=True), [xm])

    plan: dict = {}
    transformer_layer_plan(plan, "blk", 8, 32)
    layer_params = {k: Tensor(rng.standard_normal(s.shape) * 0.3, requires_grad=True) for k, s in plan.items()}
    tokens = _t(rng, 5, 8)
    enc = dataclasses.replace(DptConfig().encoder, embed_dim=8, heads=2)
    run("transformer_layer", lambda: transformer_layer(tokens, layer_params, "blk", enc), [tokens, *layer_params.values()])
    logits = _t(rng, 3, 2, 2)
    labels = np.array([[0, 2], [1, 255]])
    reports["cross_entropy"] = gradcheck(lambda: cross_entropy_loss(logits, labels), [logits], tol=tol)
    pred = _t(rng, 3, 3)
    target, mask = rng.standard_normal((3, 3)), rng.random((3, 3)) > 0.3
    reports["masked_mse"] = gradcheck(lambda: masked_mse_loss(pred, target, mask), [pred], tol=tol)
    return reports


def _guard(cfg: DptConfig) -> None:
    n = count_parameters(param_plan(cfg))
    if n > TOY_PARAMETER_LIMIT:
        raise ToyGuardError(f"config has {n} parameters; gradcheck is limited to {TOY_PARAMETER_LIMIT}")


def _generic_model(cfg: DptConfig, seed: int) -> DPT:
    """float64 model with jittered parameters.

    Zero-initialised biases leave exact zeros (e.g. bias-only transpose-conv
    outputs) sitting on ReLU kinks, where finite differences are meaningless.
    """
    params = init_params(cfg, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 3)
    for name, t in params.items():
        if t.requires_grad:
            t.data += 0.05 * rng.standard_normal(t.shape)
    return DPT(cfg, params)


def end_to_end_depth(cfg, size: int = 32, seed: int = 0, per_leaf: int = 2, tol: float = 1e-4) -> GradcheckReport:
    cfg = parse_config(cfg)
    _guard(cfg)
    model = _generic_model(cfg, seed)
    rng = np.random.default_rng(seed + 7)
    image = rng.standard_normal((3, size, size))
    target = rng.uniform(0.2, 1.0, (size, size))
    mask = rng.random((size, size)) > 0.2
    leaves = list(model.trainable().values())
    names = list(model.trainable())
    return gradcheck(
        lambda: masked_mse_loss(model.forward(image).prediction, target, mask),
        leaves, tol=tol, max_per_leaf=per_leaf, rng=rng, names=names,
    )


def end_to_end_segmentation(cfg, size: int = 32, seed: int = 0, per_leaf: int = 2, num_classes: int = 3, tol: float = 1e-4) -> GradcheckReport:
    cfg = parse_config(cfg)
    cfg = parse_config(dataclasses.replace(cfg, head="segmentation", num_classes=num_classes, aux_head=True))
    _guard(cfg)
    model = _generic_model(cfg, seed)
    rng = np.random.default_rng(seed + 11)
    image = rng.standard_normal((3, size, size))
    labels = rng.integers(0, num_classes, (size, size))

    def loss():
        out = model.forward(image, training=True, rng=np.random.default_rng(seed))
        return segmentation_loss(out.prediction, out.aux_logits, labels, aux_weight=cfg.aux_weight)

    leaves = list(model.trainable().values())
    return gradcheck(loss, leaves, tol=tol, max_per_leaf=per_leaf, rng=rng, names=list(model.trainable()))


def run_all(cfg, size: int = 32, seed: int = 0, per_leaf: int = 2, tol: float = 1e-4) -> dict[str, GradcheckReport]:
    cfg = parse_config(cfg)
    _guard(cfg)
    reports = {f"op.{k}": v for k, v in primitive_checks(seed, tol).items()}
    reports["model.depth_masked_mse"] = end_to_end_depth(cfg, size, seed, per_leaf, tol)
    reports["model.seg_ce_aux"] = end_to_end_segmentation(cfg, size, seed, per_leaf, tol=tol)
    return reports
