"""Acceptance criteria 1-10, one test each, each reporting a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy.special import erf

from dpt import archive, imageio
from dpt.bench import format_sweep, resolution_sweep
from dpt.cli import main
from dpt.config import parse_config, preset
from dpt.encoder import TokenSet, embed_patches, interpolate_pos_embed, transformer_layer
from dpt.metrics import (
    DepthEvalPair,
    OrdinalPair,
    align_affine_lsq,
    aligned_depth,
    depth_metrics,
    relative_improvement,
    seg_metrics,
    whdr,
)
from dpt.model import DPT
from dpt.params import count_parameters, param_plan
from dpt.selfcheck import run_all
from dpt.tensor import Tensor, no_grad
from dpt.train import overfit, synthetic_depth_sample

from oracles import depth_metrics_loop, seg_metrics_sets, whdr_enumerate


def test_1_parameter_counts(criterion):
    start = time.perf_counter()
    large = count_parameters(param_plan(parse_config("large")))
    base = count_parameters(param_plan(parse_config("base")))
    elapsed = time.perf_counter() - start
    ok = abs(large / 343e6 - 1) <= 0.05 and abs(base / 112e6 - 1) <= 0.05 and elapsed < 10
    criterion(1, "parameter counts within 5%", ok,
              f"large={large / 1e6:.1f}M vs 343M ({100 * (large / 343e6 - 1):+.1f}%), "
              f"base={base / 1e6:.1f}M vs 112M ({100 * (base / 112e6 - 1):+.1f}%), {elapsed:.2f}s")


def test_2_token_arithmetic(criterion):
    cfg = preset("toy")
    model = DPT(cfg, seed=0)
    details, ok = [], True
    with no_grad():
        for size, expected in ((384, 576), (480, 900)):
            image = Tensor(np.random.default_rng(size).standard_normal((3, size, size)).astype(np.float32))
            tokens = embed_patches(image, cfg.encoder, model.params)
            counts = [tokens.tokens.shape[0]]
            x = tokens.tokens
            for i in range(cfg.encoder.depth):
                x = transformer_layer(x, model.params, f"encoder.blocks.{i}", cfg.encoder)
                counts.append(x.shape[0])
            ok &= tokens.num_patches == expected == size * size // 16**2
            ok &= all(c == expected + 1 for c in counts)
            details.append(f"{size}: N_p={tokens.num_patches}, rows per layer={sorted(set(counts))}")
    criterion(2, "N_p = HW/p^2 and token count conserved", ok, "; ".join(details))


def test_3_shape_pipeline(criterion):
    model = DPT({"preset": "toy", "features": 256}, seed=0)
    ok, details = True, []
    for size in (64, 128, 384, 416):
        with no_grad():
            out = model.forward(np.zeros((3, size, size), np.float32), keep_intermediates=True)
        want = [(256, size // s, size // s) for s in (4, 8, 16, 32)]
        good = (
            [m.shape for m in out.pyramid] == want
            and out.decoded.shape == (256, size // 2, size // 2)
            and out.prediction.shape == (size, size)
        )
        ok &= good
        details.append(f"{size}:{'ok' if good else 'bad'}")
    criterion(3, "reassemble 1/4..1/32 at 256ch, decode 1/2, head full-res", ok, ", ".join(details))


def test_4_gradient_integrity(criterion):
    start = time.perf_counter()
    reports = run_all("toy", size=32, seed=0, per_leaf=2, tol=1e-4)
    elapsed = time.perf_counter() - start
    worst = max(r.max_rel_error for r in reports.values())
    failed = [k for k, r in reports.items() if not r.passed]
    needed = {"model.depth_masked_mse", "model.seg_ce_aux"}
    ok = not failed and needed <= set(reports) and elapsed < 300
    criterion(4, "gradcheck primitives + toy depth/seg(aux 0.2) at 1e-4", ok,
              f"{len(reports)} checks, worst={worst:.2e}, failed={failed}, {elapsed:.1f}s")


def _gelu(z):
    return 0.5 * z * (1 + erf(z / math.sqrt(2)))


def test_5_readout_variants(criterion):
    from dpt.reassemble import read

    rng = np.random.default_rng(5)
    rows = rng.standard_normal((10, 6))
    rows[0] = 0.0
    zero_readout = TokenSet(Tensor(rows), (3, 3))
    add_eq_ignore = np.array_equal(read(zero_readout, "add").data, read(zero_readout, "ignore").data)

    params = {"r.readout.weight": Tensor(rng.standard_normal((12, 6))), "r.readout.bias": Tensor(rng.standard_normal(6))}
    rows = rng.standard_normal((10, 6))
    perm = rng.permutation(9)
    permuted = np.concatenate([rows[:1], rows[1:][perm]])
    equivariant = all(
        np.allclose(read(TokenSet(Tensor(permuted), (3, 3)), m, params, "r").data,
                    read(TokenSet(Tensor(rows), (3, 3)), m, params, "r").data[perm], rtol=1e-13, atol=1e-14)
        for m in ("ignore", "add", "project")
    )

    d2 = np.array([[0.3, -0.7], [1.0, 2.0], [-1.5, 0.5], [0.25, 0.0]])
    w = np.array([[0.2, -0.1], [0.4, 0.3], [-0.6, 0.5], [0.1, 0.9]])
    b = np.array([0.01, -0.02])
    got = read(TokenSet(Tensor(d2), (1, 3)), "project",
               {"p.readout.weight": Tensor(w), "p.readout.bias": Tensor(b)}, "p").data
    oracle = np.zeros((3, 2))
    for i in range(3):
        cat = [d2[i + 1, 0], d2[i + 1, 1], d2[0, 0], d2[0, 1]]
        for j in range(2):
            oracle[i, j] = _gelu(sum(cat[k] * w[k, j] for k in range(4)) + b[j])
    mlp_ok = np.allclose(got, oracle, rtol=1e-14, atol=1e-15)
    criterion(5, "readout ignore/add/project properties", add_eq_ignore and equivariant and mlp_ok,
              f"add==ignore@t0=0:{add_eq_ignore}, perm-equivariant:{equivariant}, D=2 MLP oracle:{mlp_ok}")


def test_6_varying_resolution(criterion):
    model = DPT("toy", seed=0)
    shapes = {}
    for size in (384, 480):
        image = np.random.default_rng(size).standard_normal((3, size, size)).astype(np.float32)
        shapes[size] = model.predict(image).shape
    res_ok = shapes == {384: (384, 384), 480: (480, 480)}
    pos = model.params["encoder.pos_embed"]
    identity = interpolate_pos_embed(pos, (4, 4), (4, 4)).data.tobytes() == pos.data.tobytes()
    image, target = synthetic_depth_sample(64)
    rows = resolution_sweep(model, image, 1.0 / target, [32, 96, 128], reference_size=64)
    table = format_sweep(rows, 64)
    table_ok = len(table.splitlines()) == 2 + len(rows) and rows[0].relative_loss_pct == 0.0
    print(table)
    criterion(6, "384/480 inference, identity pos-embed, sweep table", res_ok and identity and table_ok,
              f"outputs={shapes}, bit-exact identity={identity}, sweep rows={len(rows)}")


def test_7_metric_oracles(criterion):
    rng = np.random.default_rng(7)
    mismatches = {"depth": 0, "seg": 0, "whdr": 0}
    worst_residual = 0.0
    for _ in range(1000):
        g = rng.uniform(0.5, 20.0, (8, 8))
        mask = rng.random((8, 8)) > 0.15
        pred = 1.0 / g * rng.uniform(0.5, 1.5, (8, 8)) * rng.uniform(0.1, 10) + rng.uniform(-0.05, 0.05)
        pair = DepthEvalPair(pred, g, mask)
        got = depth_metrics(pair).to_dict()
        ref = depth_metrics_loop(aligned_depth(pair), g, mask)
        mismatches["depth"] += any(got[k] != v for k, v in ref.items())
        got_raw = depth_metrics(DepthEvalPair(1.0 / pred.clip(1e-3), g, mask), aligned=False).to_dict()
        ref_raw = depth_metrics_loop(1.0 / pred.clip(1e-3), g, mask)
        mismatches["depth"] += any(got_raw[k] != v for k, v in ref_raw.items())

        k = int(rng.integers(2, 6))
        gl, pl = rng.integers(0, k, (8, 8)), rng.integers(0, k, (8, 8))
        gl[rng.random((8, 8)) < 0.1] = 255
        gl[0, 0] = 0
        m = seg_metrics(pl, gl, k)
        acc, miou, _ = seg_metrics_sets(pl, gl, k)
        mismatches["seg"] += (m.pix_acc != acc) or (m.miou != miou)

        raw = [(tuple(int(v) for v in rng.integers(0, 8, 2)), tuple(int(v) for v in rng.integers(0, 8, 2)),
                str(rng.choice(["a_closer", "b_closer"]))) for _ in range(10)]
        p = rng.uniform(0.1, 1.0, (8, 8))
        mismatches["whdr"] += whdr(p, [OrdinalPair(*r) for r in raw]) != whdr_enumerate(p, raw, 0.03)

        a, b = rng.uniform(0.1, 10), rng.uniform(-1, 1)
        x = (g - b) / a
        s, t = align_affine_lsq(x, g)
        worst_residual = max(worst_residual, float(np.max(np.abs(s * x + t - g))))
    ok = not any(mismatches.values()) and worst_residual < 1e-10
    criterion(7, "metrics equal brute-force oracles (1000 trials), exact affine recovery", ok,
              f"mismatches={mismatches}, max affine residual={worst_residual:.1e}")


def test_8_relative_improvement(criterion):
    kitti = relative_improvement(8.46, 23.90)
    hybrid = relative_improvement(11.56, 23.90)
    ok = abs(kitti - (-64.6)) <= 0.1 and abs(hybrid - (-51.6)) <= 0.1
    criterion(8, "relative improvement arithmetic", ok, f"(8.46, 23.90)->{kitti:.2f}%, (11.56, 23.90)->{hybrid:.2f}%")


def test_9_determinism_and_serialization(criterion, tmp_path):
    rng = np.random.default_rng(9)
    imageio.write_pnm(tmp_path / "in.ppm", rng.integers(0, 256, (3, 64, 96)).astype(np.uint16))
    weights = tmp_path / "w.dptw"
    assert main(["init-weights", "--preset", "toy", "--seed", "3", "--out", str(weights)]) == 0
    outs = []
    for i in range(2):
        path = tmp_path / f"out{i}.raw"
        assert main(["infer", "--preset", "toy", "--weights", str(weights), "--image", str(tmp_path / "in.ppm"),
                     "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    same_output = outs[0] == outs[1]
    first = weights.read_bytes()
    archive.save_weights(archive.load_weights(weights, "toy"), tmp_path / "again.dptw")
    round_trip = (tmp_path / "again.dptw").read_bytes() == first
    criterion(9, "bitwise-deterministic infer, byte-exact archive round trip", same_output and round_trip,
              f"infer identical={same_output}, archive identical={round_trip} ({len(first)} bytes)")


def test_10_overfit(criterion):
    start = time.perf_counter()
    model = DPT("toy", seed=0)
    image, target = synthetic_depth_sample(64)
    log = overfit(model, image, target, steps=500)
    elapsed = time.perf_counter() - start
    ok = log.final < 1e-3 and elapsed < 120
    criterion(10, "toy overfit masked-MSE < 1e-3 in 500 SGD steps", ok,
              f"initial={log.losses[0]:.3e}, final={log.final:.3e}, {elapsed:.1f}s")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
