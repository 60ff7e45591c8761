import json

import numpy as np
import pytest

from dpt.metrics import (
    DegenerateAlignment,
    DepthEvalPair,
    OrdinalPair,
    align_affine_lsq,
    aligned_depth,
    batch_align_average,
    confusion_matrix,
    depth_metrics,
    format_report,
    relative_abs_deviation,
    relative_improvement,
    report_json,
    seg_metrics,
    whdr,
)

from oracles import depth_metrics_loop, seg_metrics_sets, whdr_enumerate


def test_align_hand_example():
    s, t = align_affine_lsq([1.0, 2.0], [3.0, 5.0])
    assert (s, t) == pytest.approx((2.0, 1.0), abs=1e-14)


def test_align_identity(rng):
    x = rng.uniform(0.1, 2, 20)
    assert align_affine_lsq(x, x) == pytest.approx((1.0, 0.0), abs=1e-12)


def test_align_recovers_affine_exactly(rng):
    for _ in range(50):
        g = rng.uniform(0.05, 1.0, (8, 8))
        a, b = rng.uniform(0.2, 5), rng.uniform(-1, 1)
        pred = (g - b) / a
        s, t = align_affine_lsq(pred, g)
        assert np.max(np.abs(s * pred + t - g)) < 1e-10


def test_align_uses_mask(rng):
    p = rng.standard_normal(10)
    g = 3 * p + 2
    g[:3] = 100.0
    mask = np.ones(10, bool)
    mask[:3] = False
    assert align_affine_lsq(p, g, mask) == pytest.approx((3.0, 2.0), abs=1e-12)


def test_align_degenerate():
    with pytest.raises(DegenerateAlignment):
        align_affine_lsq(np.ones(5), np.arange(5.0))
    with pytest.raises(DegenerateAlignment):
        align_affine_lsq([1.0], [2.0])


def test_pair_align_against_inverse_depth(rng):
    depth = rng.uniform(1, 10, (6, 6))
    pred = 0.5 / depth + 0.2
    pair = DepthEvalPair(pred, depth)
    s, t = pair.align()
    assert (s, t) == pytest.approx((2.0, -0.4), abs=1e-10)
    assert relative_abs_deviation(pair) < 1e-10


def test_batch_align_average(rng):
    p = rng.uniform(0.1, 1, 10)
    single = DepthEvalPair(p, 1.0 / (2 * p + 1))
    assert batch_align_average([single]) == pytest.approx(single.align(), abs=1e-12)
    other = DepthEvalPair(p, 1.0 / (4 * p + 3))
    assert batch_align_average([single, other]) == pytest.approx((3.0, 2.0), abs=1e-9)
    assert batch_align_average([single] * 4) == pytest.approx(single.align(), abs=1e-12)


def test_depth_metrics_single_pixel():
    m = depth_metrics(DepthEvalPair([2.0], [1.0]), aligned=False)
    assert m.abs_rel == 1.0
    assert m.delta_acc[0] == 0.0
    assert m.delta_err[0] == 100.0


def test_depth_metrics_perfect(rng):
    g = rng.uniform(1, 5, (4, 4))
    m = depth_metrics(DepthEvalPair(g, g), aligned=False)
    assert m.abs_rel == 0 and m.rmse == 0 and m.delta_acc == [1.0, 1.0, 1.0]
    aligned = depth_metrics(DepthEvalPair(3.0 / g - 0.1, g))
    assert aligned.abs_rel < 1e-12


def test_depth_metrics_swap_invariance_of_delta(rng):
    a, b = rng.uniform(1, 5, (5, 5)), rng.uniform(1, 5, (5, 5))
    m1 = depth_metrics(DepthEvalPair(a, b), aligned=False)
    m2 = depth_metrics(DepthEvalPair(b, a), aligned=False)
    assert m1.delta_acc == m2.delta_acc


def test_depth_metrics_match_loop_oracle_exactly(rng):
    for _ in range(100):
        g = rng.uniform(0.5, 10, (8, 8))
        mask = rng.random((8, 8)) > 0.2
        pred_inv = 1.0 / g * rng.uniform(0.7, 1.3, (8, 8)) * 2 + 0.1
        pair = DepthEvalPair(pred_inv, g, mask)
        for aligned in (True, False):
            pd = aligned_depth(pair) if aligned else pred_inv
            got = depth_metrics(pair, aligned=aligned).to_dict()
            ref = depth_metrics_loop(pd, g, mask)
            for key, value in ref.items():
                assert got[key] == value, key


def test_depth_metrics_empty_mask():
    with pytest.raises(ValueError):
        depth_metrics(DepthEvalPair(np.ones((2, 2)), np.ones((2, 2)), np.zeros((2, 2), bool)))


def test_pair_rejects_non_positive_ground_truth():
    with pytest.raises(ValueError):
        DepthEvalPair(np.ones(2), np.array([1.0, -1.0]), np.ones(2, bool))


def test_whdr_agree_and_disagree():
    pred = np.array([[2.0, 1.0]])
    assert whdr(pred, [OrdinalPair((0, 0), (0, 1), "a_closer")]) == 0.0
    assert whdr(pred, [OrdinalPair((0, 0), (0, 1), "b_closer")]) == 1.0


def test_whdr_matches_enumeration(rng):
    pred = rng.uniform(0.1, 1.0, (8, 8))
    raw = []
    for _ in range(10):
        a = tuple(int(v) for v in rng.integers(0, 8, 2))
        b = tuple(int(v) for v in rng.integers(0, 8, 2))
        raw.append((a, b, str(rng.choice(["a_closer", "b_closer"]))))
    pairs = [OrdinalPair(a, b, r) for a, b, r in raw]
    assert whdr(pred, pairs) == whdr_enumerate(pred, raw, 0.03)


def test_whdr_rejects_outside_points():
    with pytest.raises(ValueError):
        whdr(np.ones((2, 2)), [OrdinalPair((0, 0), (5, 5), "a_closer")])


def test_seg_hand_example():
    m = seg_metrics(np.array([[0, 0], [1, 1]]), np.array([[0, 1], [1, 1]]), 2)
    assert m.pix_acc == 0.75
    assert m.per_class_iou == [0.5, pytest.approx(2 / 3)]
    assert m.miou == pytest.approx(0.5833, abs=1e-4)


def test_seg_perfect(rng):
    g = rng.integers(0, 4, (5, 5))
    m = seg_metrics(g, g, 4)
    assert m.pix_acc == 1.0 and m.miou == 1.0


def test_seg_matches_set_oracle(rng):
    for _ in range(50):
        g = rng.integers(0, 4, (4, 4))
        g[rng.random((4, 4)) < 0.1] = 255
        if (g == 255).all():
            continue
        p = rng.integers(0, 4, (4, 4))
        m = seg_metrics(p, g, 4)
        acc, miou, ious = seg_metrics_sets(p, g, 4)
        assert m.pix_acc == acc and m.miou == miou
        assert [v if v is not None else float("nan") for v in m.per_class_iou] == pytest.approx(ious, nan_ok=True)


def test_seg_label_permutation_invariance(rng):
    g, p = rng.integers(0, 5, (6, 6)), rng.integers(0, 5, (6, 6))
    perm = rng.permutation(5)
    a, b = seg_metrics(p, g, 5), seg_metrics(perm[p], perm[g], 5)
    assert a.pix_acc == b.pix_acc and a.miou == pytest.approx(b.miou, abs=1e-15)


def test_confusion_rows_are_ground_truth():
    cm = confusion_matrix(np.array([1, 1]), np.array([0, 1]), 2)
    assert cm.tolist() == [[0, 1], [0, 1]]
    with pytest.raises(ValueError):
        confusion_matrix(np.array([3]), np.array([0]), 2)


@pytest.mark.parametrize("new,base,expected", [(8.46, 23.90, -64.6), (11.56, 23.90, -51.6), (5.0, 5.0, 0.0)])
def test_relative_improvement(new, base, expected):
    assert abs(relative_improvement(new, base) - expected) <= 0.1


def test_report_formats(rng):
    rec = {"task": "depth", "abs_rel": 0.1234567, "delta_acc": [0.5, 0.75]}
    text = format_report(rec)
    assert "abs_rel=0.123457" in text and "delta_acc[1]=0.75" in text
    assert json.loads(report_json(rec)) == rec
