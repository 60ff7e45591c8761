import numpy as np
import pytest

from dpt.config import AUX_LOSS_WEIGHT, parse_config, preset
from dpt.heads import aux_segmentation_head, depth_head, segmentation_head
from dpt.losses import cross_entropy_loss, masked_mse_loss, segmentation_loss
from dpt.params import head_plan
from dpt.tensor import Tensor


def head_params(rng, cfg, scale=0.3):
    plan: dict = {}
    head_plan(plan, cfg)
    return {k: Tensor(rng.standard_normal(s.shape) * scale if s.trainable else np.abs(rng.standard_normal(s.shape)) + 0.5)
            for k, s in plan.items()}


def test_depth_head_shape_and_sign(rng):
    cfg = parse_config({"preset": "toy", "features": 16})
    out = depth_head(Tensor(rng.standard_normal((16, 12, 10))), head_params(rng, cfg, 1.0))
    assert out.shape == (24, 20)
    assert (out.data >= 0).all()


def test_depth_head_zero_weights(rng):
    cfg = parse_config({"preset": "toy", "features": 16})
    params = {k: Tensor(np.zeros_like(v.data)) for k, v in head_params(rng, cfg).items()}
    assert not depth_head(Tensor(rng.standard_normal((16, 4, 4))), params).data.any()


def seg_cfg(classes=5, features=8):
    return parse_config({"preset": "toy", "features": features, "head": "segmentation", "num_classes": classes})


def test_segmentation_head_shape_and_softmax(rng):
    cfg = seg_cfg()
    params = head_params(rng, cfg)
    logits = segmentation_head(Tensor(rng.standard_normal((8, 6, 6))), params, (12, 12))
    assert logits.shape == (5, 12, 12)
    p = np.exp(logits.data - logits.data.max(axis=0))
    np.testing.assert_allclose((p / p.sum(axis=0)).sum(axis=0), 1.0, atol=1e-12)


def test_segmentation_inference_is_deterministic(rng):
    cfg = seg_cfg()
    params = head_params(rng, cfg)
    f = Tensor(rng.standard_normal((8, 4, 4)))
    a = segmentation_head(f, params, (8, 8), training=False, dropout=0.5).data
    b = segmentation_head(f, params, (8, 8), training=False, dropout=0.5).data
    np.testing.assert_array_equal(a, b)


def test_segmentation_dropout_seeded(rng):
    cfg = seg_cfg()
    params = head_params(rng, cfg)
    f = Tensor(rng.standard_normal((8, 4, 4)))
    run = lambda s: segmentation_head(f, params, (8, 8), training=True, dropout=0.5, rng=np.random.default_rng(s)).data
    np.testing.assert_array_equal(run(3), run(3))
    assert not np.array_equal(run(3), run(4))


def test_aux_head_needs_penultimate(rng):
    params = head_params(rng, seg_cfg())
    with pytest.raises(ValueError):
        aux_segmentation_head(None, params, (8, 8))
    assert aux_segmentation_head(Tensor(rng.standard_normal((8, 2, 2))), params, (8, 8)).shape == (5, 8, 8)


def test_aux_weight_default():
    assert AUX_LOSS_WEIGHT == 0.2
    assert preset("toy").aux_weight == 0.2


def test_cross_entropy_uniform_is_log_c():
    logits = Tensor(np.zeros((7, 3, 3)))
    labels = np.arange(9).reshape(3, 3) % 7
    assert abs(cross_entropy_loss(logits, labels).item() - np.log(7)) < 1e-14


def test_cross_entropy_saturates():
    logits = np.zeros((3, 2, 2))
    labels = np.array([[0, 1], [2, 0]])
    for y in range(2):
        for x in range(2):
            logits[labels[y, x], y, x] = 200.0
    assert cross_entropy_loss(Tensor(logits), labels).item() < 1e-80


def test_cross_entropy_ignores_label(rng):
    logits = rng.standard_normal((3, 1, 2))
    full = cross_entropy_loss(Tensor(logits[:, :, :1]), np.array([[1]])).item()
    assert cross_entropy_loss(Tensor(logits), np.array([[1, 255]])).item() == pytest.approx(full, abs=1e-15)
    with pytest.raises(ValueError):
        cross_entropy_loss(Tensor(logits), np.array([[255, 255]]))


def test_segmentation_loss_aux_weighting(rng):
    main, aux = Tensor(rng.standard_normal((4, 2, 2))), Tensor(np.zeros((4, 2, 2)))
    labels = np.array([[0, 1], [2, 3]])
    alone = cross_entropy_loss(main, labels).item()
    assert segmentation_loss(main, aux, labels, aux_weight=0.0).item() == alone
    combined = segmentation_loss(main, aux, labels).item()
    assert combined == pytest.approx(alone + 0.2 * np.log(4), abs=1e-14)


def test_masked_mse_examples(rng):
    g = rng.standard_normal((4, 4))
    assert masked_mse_loss(Tensor(g), g).item() == 0.0
    assert masked_mse_loss(Tensor(g + 1), g).item() == pytest.approx(1.0, abs=1e-14)
    p, mask = rng.standard_normal((4, 4)), rng.random((4, 4)) > 0.4
    acc, n = 0.0, 0
    for y in range(4):
        for x in range(4):
            if mask[y, x]:
                acc += (p[y, x] - g[y, x]) ** 2
                n += 1
    assert masked_mse_loss(Tensor(p), g, mask).item() == pytest.approx(acc / n, rel=1e-14)
    with pytest.raises(ValueError):
        masked_mse_loss(Tensor(p), g, np.zeros((4, 4), bool))
