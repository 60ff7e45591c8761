import numpy as np
import pytest

from dpt.config import preset
from dpt.hybrid import embed_hybrid, group_count
from dpt.params import init_params
from dpt.tensor import Tensor


@pytest.fixture(scope="module")
def hybrid():
    cfg = preset("toy-hybrid")
    return cfg, init_params(cfg, seed=0)


def test_group_count_clamps():
    assert group_count(64, 32) == 32
    assert group_count(16, 32) == 16
    assert group_count(24, 32) == 24
    assert group_count(48, 32) == 24


def test_tap_resolutions_64(hybrid):
    cfg, params = hybrid
    r0, r1, tokens = embed_hybrid(Tensor(np.zeros((3, 64, 64), np.float32)), cfg, params)
    assert r0.shape[1:] == (16, 16)
    assert r1.shape[1:] == (8, 8)
    assert tokens.tokens.shape == (17, cfg.encoder.embed_dim)


@pytest.mark.parametrize("h,w", [(32, 96), (96, 64)])
def test_tap_resolutions_general(hybrid, h, w):
    cfg, params = hybrid
    r0, r1, tokens = embed_hybrid(Tensor(np.ones((3, h, w), np.float32)), cfg, params)
    assert r0.shape[1:] == (h // 4, w // 4)
    assert r1.shape[1:] == (h // 8, w // 8)
    assert tokens.grid == (h // 16, w // 16)


def test_token_count_matches_patch_embedding_at_384():
    # shape arithmetic only; stride 16 gives the same 24x24 grid as p=16
    from dpt.bench import stage_shapes

    rows = dict(stage_shapes(preset("hybrid"), 384, 384))
    assert rows["tokens"] == (577, 768)


def test_zero_input_zero_params_gives_zero_maps(hybrid):
    cfg, params = hybrid
    zero = {k: Tensor(np.zeros_like(v.data)) for k, v in params.items()}
    r0, r1, tokens = embed_hybrid(Tensor(np.zeros((3, 32, 32), np.float32)), cfg, zero)
    assert not r0.data.any() and not r1.data.any() and not tokens.tokens.data.any()


def test_hybrid_model_runs(hybrid):
    from dpt.model import DPT

    cfg, params = hybrid
    out = DPT(cfg, params).predict(np.zeros((3, 64, 64), np.float32))
    assert out.shape == (64, 64) and (out >= 0).all()
