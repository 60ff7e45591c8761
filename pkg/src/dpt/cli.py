"""Command-line interface: ``dpt <subcommand> [options]``.

Exit codes: 0 success, 2 configuration/input error, 3 I/O error,
4 numerical failure, 5 gradient check failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import archive, imageio
from .bench import DEFAULT_RUNS, TIMING_HEADER, benchmark, describe, format_sweep, resolution_sweep
from .config import DECODER_STRIDE, ConfigError, parse_config
from .metrics import (
    DepthEvalPair,
    OrdinalPair,
    depth_metrics,
    format_report,
    relative_abs_deviation,
    report_json,
    seg_metrics,
    whdr,
)
from .model import DPT, ShapeError
from .selfcheck import ToyGuardError, run_all
from .tensor import NumericalError, detect_anomaly, no_grad

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_GRADCHECK = 0, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_config(args):
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise CliError(f"cannot read config: {exc}", EXIT_IO) from None
        cfg = parse_config(text)
        if args.preset:
            raise CliError("--config and --preset are mutually exclusive", EXIT_CONFIG)
        return cfg
    return parse_config(args.preset or "toy")


def _load_model(args, cfg) -> DPT:
    if getattr(args, "weights", None):
        return archive.load_weights(args.weights, cfg)
    return DPT(cfg, seed=args.seed)


def _sizes(values) -> list[int]:
    out = []
    for v in values or []:
        out.extend(int(x) for x in str(v).split(",") if x)
    return out


def _input_image(path, model: DPT) -> np.ndarray:
    pixels, maxval = imageio.read_image(path)
    if maxval is None:
        if pixels.shape[0] != 3:
            raise CliError(f"raw input must have 3 channels, got {pixels.shape[0]}", EXIT_CONFIG)
        return pixels.astype(model.dtype)
    return model.normalize(imageio.to_rgb8_range(pixels, maxval))


def _pad_to_stride(image: np.ndarray):
    _, h, w = image.shape
    ph = (-h) % DECODER_STRIDE
    pw = (-w) % DECODER_STRIDE
    if not ph and not pw:
        return image, (h, w)
    mode = "reflect" if ph < h and pw < w else "symmetric"
    return np.pad(image, ((0, 0), (0, ph), (0, pw)), mode=mode), (h, w)


def cmd_describe(args) -> int:
    cfg = _load_config(args)
    sizes = _sizes(args.size) or [384]
    for s in sizes:
        print(f"# {cfg.name} @ {s}x{s}")
        print(describe(cfg, s))
    return EXIT_OK


def run_inference(model: DPT, image: np.ndarray, auto_pad: bool = False, check_finite: bool = False) -> np.ndarray:
    _, h, w = image.shape
    if auto_pad:
        image, (h, w) = _pad_to_stride(image)
    elif h % DECODER_STRIDE or w % DECODER_STRIDE:
        raise ShapeError(f"input {h}x{w} is not divisible by {DECODER_STRIDE} (use --auto-pad)")
    with no_grad(), detect_anomaly(check_finite):
        pred = model.forward(image).prediction.data
    if not np.all(np.isfinite(pred)):
        raise NumericalError("prediction contains NaN or Inf")
    return pred[..., :h, :w]


def cmd_infer(args) -> int:
    cfg = _load_config(args)
    model = _load_model(args, cfg)
    image = _input_image(args.image, model)
    pred = run_inference(model, image, args.auto_pad, args.check_finite)
    out = Path(args.out)
    if cfg.head == "depth":
        imageio.write_raw(out, pred)
        print(f"depth {pred.shape[0]}x{pred.shape[1]} min={pred.min() + 0.0:.6g} max={pred.max() + 0.0:.6g} -> {out}")
    else:
        labels = pred.argmax(axis=0)
        maxval = 255 if cfg.num_classes <= 256 else 65535
        imageio.write_pnm(out, labels[None], maxval=maxval)
        logits_path = out.with_name(out.name + ".logits.raw")
        imageio.write_raw(logits_path, pred)
        print(f"labels {labels.shape[0]}x{labels.shape[1]} -> {out}; logits -> {logits_path}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = _load_config(args)
    size = (_sizes(args.size) or [32])[0]
    reports = run_all(cfg, size=size, seed=args.seed, per_leaf=args.samples, tol=args.tol)
    failed = 0
    for name, rep in reports.items():
        print(f"{name:<28} {rep}")
        failed += not rep.passed
    print(f"{len(reports) - failed}/{len(reports)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_GRADCHECK


def cmd_bench(args) -> int:
    cfg = _load_config(args)
    model = _load_model(args, cfg)
    sizes = _sizes(args.size) or [384]
    timings = benchmark(model, sizes, runs=args.runs, warmup=args.warmup, seed=args.seed)
    print(f"# {cfg.name}: {model.num_parameters()} parameters, average over {args.runs} runs")
    print(TIMING_HEADER)
    for t in timings:
        print(t.row())
    if args.image and args.gt:
        image = _input_image(args.image, model)
        gt = imageio.read_map(args.gt)
        rows = resolution_sweep(model, image, gt, sizes, args.reference_size)
        print()
        print(format_sweep(rows, args.reference_size))
    return EXIT_OK


def _read_pairs(path) -> list[OrdinalPair]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read ordinal pairs: {exc}", EXIT_IO) from None
    return [OrdinalPair(tuple(p["a"]), tuple(p["b"]), p["relation"]) for p in doc]


def cmd_eval(args) -> int:
    pred = imageio.read_image(args.pred)[0]
    gt = imageio.read_map(args.gt)
    mask = imageio.read_map(args.mask) > 0 if args.mask else None
    if args.task == "depth":
        pair = DepthEvalPair(pred[0], gt, mask)
        record = {"task": "depth", "aligned": not args.no_align}
        record.update(depth_metrics(pair, aligned=not args.no_align).to_dict())
        if not args.no_align:
            record["scale"], record["shift"] = pair.align()
            record["rel_abs_dev"] = relative_abs_deviation(pair)
        if args.pairs:
            record["whdr"] = whdr(pred[0], _read_pairs(args.pairs), args.margin)
    else:
        labels = pred.argmax(axis=0) if pred.shape[0] > 1 else pred[0]
        if args.num_classes is None:
            raise CliError("--num-classes is required for segmentation", EXIT_CONFIG)
        record = {"task": "segmentation"}
        record.update(seg_metrics(labels.astype(int), gt.astype(int), args.num_classes, args.ignore_label).to_dict())
    print(format_report(record))
    if args.json:
        Path(args.json).write_text(report_json(record))
    return EXIT_OK


def cmd_convert(args) -> int:
    src, dst = Path(args.input), Path(args.output)
    pixels, maxval = imageio.read_image(src)
    if dst.suffix.lower() in (".ppm", ".pgm", ".pnm"):
        values = np.asarray(pixels, dtype=np.float64)
        out_max = args.maxval
        imageio.write_pnm(dst, np.clip(np.rint(values), 0, out_max).astype(np.uint16), maxval=out_max)
    else:
        imageio.write_raw(dst, pixels.astype(np.float32))
    print(f"{src} -> {dst} ({pixels.shape[0]}x{pixels.shape[1]}x{pixels.shape[2]})")
    return EXIT_OK


def cmd_init(args) -> int:
    cfg = _load_config(args)
    model = DPT(cfg, seed=args.seed)
    archive.save_weights(model, args.out)
    print(f"wrote {model.num_parameters()} parameters -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpt", description="Dense prediction transformer toolkit")
    parser.add_argument("--threads", type=int, default=None, help="BLAS threads (falls back to $DPT_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_opts(p, weights=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--preset", help="preset name: base, large, hybrid, toy, toy-hybrid")
        p.add_argument("--seed", type=int, default=0)
        if weights:
            p.add_argument("--weights", help="DPTW weight archive")

    p = sub.add_parser("describe", help="per-stage shapes and parameter count")
    model_opts(p, weights=False)
    p.add_argument("--size", action="append", help="input size (repeatable or comma-separated)")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("infer", help="run a forward pass on one image")
    model_opts(p)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--auto-pad", action="store_true", help="reflect-pad to a multiple of 32 and crop back")
    p.add_argument("--check-finite", action="store_true", help="scan every op for NaN/Inf")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    model_opts(p, weights=False)
    p.add_argument("--size", action="append")
    p.add_argument("--samples", type=int, default=2, help="elements checked per parameter tensor")
    p.add_argument("--tol", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="forward-pass latency")
    model_opts(p)
    p.add_argument("--size", action="append")
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--image", help="input for the resolution sweep")
    p.add_argument("--gt", help="ground-truth depth map for the resolution sweep")
    p.add_argument("--reference-size", type=int, default=384)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="metrics for a prediction/ground-truth pair")
    p.add_argument("--task", choices=("depth", "segmentation"), default="depth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask")
    p.add_argument("--no-align", action="store_true", help="prediction is already depth")
    p.add_argument("--pairs", help="JSON list of ordinal pairs for WHDR")
    p.add_argument("--margin", type=float, default=0.03)
    p.add_argument("--num-classes", type=int)
    p.add_argument("--ignore-label", type=int, default=255)
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("convert", help="convert between PGM/PPM and raw float maps")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--maxval", type=int, default=255)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("init-weights", help="write a freshly initialised weight archive")
    model_opts(p, weights=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("DPT_THREADS"):
        threads = int(os.environ["DPT_THREADS"])
    try:
        if threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=threads):
                return args.func(args)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ShapeError, ToyGuardError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (archive.ArchiveError, imageio.ImageFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
