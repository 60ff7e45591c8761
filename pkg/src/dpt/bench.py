"""Shape description, analytic FLOP counts, latency and resolution sweeps."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import functional as F
from .config import DEPTH_HEAD_HIDDEN, DptConfig, parse_config
from .metrics import DepthEvalPair, relative_abs_deviation, relative_improvement
from .model import check_input_size
from .params import count_by_group, count_parameters, hook_channels, hook_stride, param_plan
from .tensor import Tensor, no_grad

DEFAULT_RUNS = 400


def _conv_flops(c_in, c_out, k, h_out, w_out):
    return 2 * c_in * c_out * k * k * h_out * w_out


@dataclass
class Description:
    stages: list = field(default_factory=list)
    parameters: int = 0
    groups: dict = field(default_factory=dict)
    flops: int = 0

    def __str__(self) -> str:
        width = max(len(name) for name, _ in self.stages)
        lines = [f"{name.ljust(width)}  {' x '.join(str(d) for d in shape)}" for name, shape in self.stages]
        lines.append("")
        for group, n in self.groups.items():
            lines.append(f"params.{group}={n}")
        lines.append(f"parameters={self.parameters} ({self.parameters / 1e6:.2f}M)")
        lines.append(f"flops={self.flops} ({self.flops / 1e9:.2f} GFLOP)")
        return "\n".join(lines)


def stage_shapes(cfg: DptConfig, h: int, w: int) -> list:
    check_input_size(h, w)
    enc = cfg.encoder
    p = enc.patch_size if enc.embedder == "patch" else 16
    grid = (h // p, w // p)
    n = grid[0] * grid[1]
    out = [("input", (3, h, w))]
    if enc.embedder == "hybrid":
        for i, c in enumerate(cfg.hybrid.stage_channels):
            out.append((f"hybrid.stage{i}", (c, h // 2 ** (i + 2), w // 2 ** (i + 2))))
    out.append(("tokens", (n + 1, enc.embed_dim)))
    for i, hook in enumerate(enc.hooks):
        if isinstance(hook, int):
            out.append((f"hook.{hook}", (n + 1, enc.embed_dim)))
        else:
            s = hook_stride(cfg, i)
            out.append((f"hook.{hook}", (hook_channels(cfg, i), h // s, w // s)))
    for i, s in enumerate(cfg.scales):
        out.append((f"reassemble.{i} (1/{s})", (cfg.features, h // s, w // s)))
    for level in reversed(range(4)):
        s = cfg.scales[level] // 2
        out.append((f"fusion.{level} (1/{s})", (cfg.features, h // s, w // s)))
    if cfg.head == "depth":
        out.append(("head.depth", (h, w)))
    else:
        out.append(("head.logits", (cfg.num_classes, h, w)))
    return out


def count_flops(cfg: DptConfig, h: int, w: int) -> int:
    """Analytic multiply-add count (x2) of convolutions and matrix products."""
    cfg = parse_config(cfg)
    check_input_size(h, w)
    enc = cfg.encoder
    d = enc.embed_dim
    total = 0
    if enc.embedder == "patch":
        p = enc.patch_size
        n = (h // p) * (w // p)
        total += 2 * n * 3 * p * p * d
    else:
        hc = cfg.hybrid
        total += _conv_flops(3, hc.stem_channels, 7, h // 2, w // 2)
        c_in = hc.stem_channels
        for s, (blocks, c_out) in enumerate(zip(hc.block_counts, hc.stage_channels)):
            ho, wo = h // 2 ** (s + 2), w // 2 ** (s + 2)
            mid = c_out // 4
            for b in range(blocks):
                hi, wi = (2 * ho, 2 * wo) if b == 0 else (ho, wo)
                total += _conv_flops(c_in, mid, 1, hi, wi) + _conv_flops(mid, mid, 3, ho, wo)
                total += _conv_flops(mid, c_out, 1, ho, wo)
                if b == 0:
                    total += _conv_flops(c_in, c_out, 1, ho, wo)
                c_in = c_out
        n = (h // 16) * (w // 16)
        total += 2 * n * c_in * d
    t = n + 1
    hidden = enc.hidden_dim
    layers = max(x for x in enc.hooks if isinstance(x, int))
    per_layer = 2 * t * d * 3 * d + 2 * 2 * t * t * d + 2 * t * d * d + 2 * 2 * t * d * hidden
    total += layers * per_layer
    for i, s in enumerate(cfg.scales):
        src = hook_stride(cfg, i)
        hi, wi = h // src, w // src
        width = cfg.stage_width(i)
        if isinstance(enc.hooks[i], int) and cfg.readout == "project":
            total += 2 * hi * wi * 2 * d * d
        total += _conv_flops(hook_channels(cfg, i), width, 1, hi, wi)
        if s >= src:
            total += _conv_flops(width, width, 3, h // s, w // s)
        else:
            total += _conv_flops(width, width, 3, hi, wi)
        if cfg.reassemble_widths is not None:
            total += _conv_flops(width, cfg.features, 3, h // s, w // s)
    f = cfg.features
    for level in range(4):
        s = cfg.scales[level]
        rcus = 2 if level < 3 else 1
        total += rcus * 2 * _conv_flops(f, f, 3, h // s, w // s)
        total += _conv_flops(f, f, 1, 2 * h // s, 2 * w // s)
    if cfg.head == "depth":
        total += _conv_flops(f, f // 2, 3, h // 2, w // 2)
        total += _conv_flops(f // 2, DEPTH_HEAD_HIDDEN, 3, h, w) + _conv_flops(DEPTH_HEAD_HIDDEN, 1, 1, h, w)
    else:
        heads = [(h // 2, w // 2)] + ([(h // 4, w // 4)] if cfg.aux_head else [])
        for hh, ww in heads:
            total += _conv_flops(f, f, 3, hh, ww) + _conv_flops(f, cfg.num_classes, 1, hh, ww)
    return int(total)


def describe(cfg, input_size) -> Description:
    """Per-stage shapes, parameter count and FLOPs, without building weights."""
    cfg = parse_config(cfg)
    h, w = (input_size, input_size) if isinstance(input_size, int) else input_size
    plan = param_plan(cfg)
    return Description(
        stages=stage_shapes(cfg, h, w),
        parameters=count_parameters(plan),
        groups=count_by_group(plan),
        flops=count_flops(cfg, h, w),
    )


@dataclass
class Timing:
    size: int
    runs: int
    mean_ms: float
    std_ms: float
    min_ms: float
    flops: int

    def row(self) -> str:
        return (
            f"{self.size:>6}  {self.runs:>5}  {self.mean_ms:>10.3f}  {self.std_ms:>9.3f}  "
            f"{self.min_ms:>9.3f}  {self.flops / 1e9:>8.3f}"
        )


TIMING_HEADER = f"{'size':>6}  {'runs':>5}  {'mean_ms':>10}  {'std_ms':>9}  {'min_ms':>9}  {'GFLOP':>8}"


def time_forward(model, size: int, runs: int = DEFAULT_RUNS, warmup: int = 5, seed: int = 0, clock=time.perf_counter) -> Timing:
    check_input_size(size, size)
    if runs < 1:
        raise ValueError("runs must be positive")
    image = np.random.default_rng(seed).standard_normal((3, size, size)).astype(model.dtype)
    samples = []
    with no_grad():
        for _ in range(warmup):
            model.forward(image)
        for _ in range(runs):
            start = clock()
            model.forward(image)
            samples.append((clock() - start) * 1e3)
    arr = np.asarray(samples)
    return Timing(size, runs, float(arr.mean()), float(arr.std()), float(arr.min()), count_flops(model.cfg, size, size))


def benchmark(model, sizes, runs: int = DEFAULT_RUNS, warmup: int = 5, seed: int = 0) -> list[Timing]:
    for s in sizes:
        check_input_size(s, s)
    return [time_forward(model, s, runs, warmup, seed) for s in sizes]


def _resize(array: np.ndarray, h: int, w: int) -> np.ndarray:
    with no_grad():
        x = Tensor(np.asarray(array, dtype=np.float64))
        squeeze = x.ndim == 2
        if squeeze:
            x = x.reshape(1, *x.shape)
        out = F.bilinear_resize(x, h, w).data
    return out[0] if squeeze else out


@dataclass
class SweepRow:
    size: int
    metric: float
    relative_loss_pct: float


def resolution_sweep(model, image: np.ndarray, ground_truth: np.ndarray, sizes, reference_size: int, mask=None) -> list[SweepRow]:
    """Alignment error at several inference sizes relative to ``reference_size``.

    ``image`` is the normalised ``3 x H x W`` network input and
    ``ground_truth`` an ``H x W`` depth map. Predictions are resized back to
    the ground-truth grid before scoring with the relative absolute
    deviation after affine alignment.
    """
    sizes = list(sizes)
    if reference_size not in sizes:
        sizes = [reference_size] + sizes
    gh, gw = ground_truth.shape
    scores = {}
    for s in sizes:
        check_input_size(s, s)
        x = _resize(image, s, s).astype(model.dtype)
        pred = _resize(model.predict(x), gh, gw)
        scores[s] = relative_abs_deviation(DepthEvalPair(pred, ground_truth, mask))
    ref = scores[reference_size]
    return [SweepRow(s, scores[s], relative_improvement(scores[s], ref) if ref else 0.0) for s in sizes]


def format_sweep(rows: list[SweepRow], reference_size: int) -> str:
    lines = [f"# relative loss vs. {reference_size}px inference (lower is better)", f"{'size':>6}  {'rel_abs_dev':>12}  {'rel_loss_%':>10}"]
    lines += [f"{r.size:>6}  {r.metric:>12.6f}  {r.relative_loss_pct:>10.2f}" for r in rows]
    return "\n".join(lines)
