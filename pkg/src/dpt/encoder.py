"""ViT encoder: patch embedding, readout token, position embeddings and hooks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import functional as F
from .config import EncoderConfig
from .tensor import Tensor, concatenate


@dataclass
class TokenSet:
    """``(N_p + 1) x D`` tokens; row 0 is the readout token."""

    tokens: Tensor
    grid: tuple
    layer: int | str = 0

    readout_index = 0

    def __post_init__(self):
        h, w = self.grid
        if self.tokens.shape[0] != h * w + 1:
            raise ValueError(f"{self.tokens.shape[0]} tokens do not match grid {h}x{w} plus readout")

    @property
    def num_patches(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


def interpolate_pos_embed(pos: Tensor, src_grid: tuple, dst_grid: tuple) -> Tensor:
    """Resize the patch rows of a position embedding to a new grid.

    The readout row is passed through; the remaining rows are treated as a
    ``D``-channel image on ``src_grid`` and bilinearly resized.
    """
    hs, ws = src_grid
    if pos.shape[0] != hs * ws + 1:
        raise ValueError(f"position embedding has {pos.shape[0]} rows, grid {hs}x{ws} needs {hs * ws + 1}")
    d = pos.shape[1]
    readout = pos[0:1]
    grid = pos[1:].reshape(hs, ws, d).transpose(2, 0, 1)
    hd, wd = dst_grid
    grid = F.bilinear_resize(grid, hd, wd)
    return concatenate([readout, grid.transpose(1, 2, 0).reshape(hd * wd, d)], axis=0)


def image_to_patches(image: Tensor, p: int) -> Tensor:
    """Flatten non-overlapping ``p x p`` patches row-major into ``N_p x 3p^2``."""
    c, h, w = image.shape
    hp, wp = h // p, w // p
    x = image.reshape(c, hp, p, wp, p).transpose(1, 3, 0, 2, 4)
    return x.reshape(hp * wp, c * p * p)


def add_readout_and_position(x: Tensor, grid: tuple, cfg: EncoderConfig, params: dict) -> TokenSet:
    tokens = concatenate([params["encoder.cls_token"], x], axis=0)
    pos = interpolate_pos_embed(params["encoder.pos_embed"], tuple(cfg.pos_grid), grid)
    return TokenSet(tokens + pos, grid, layer=0)


def embed_patches(image: Tensor, cfg: EncoderConfig, params: dict) -> TokenSet:
    p = cfg.patch_size
    _, h, w = image.shape
    if h % p or w % p:
        raise ValueError(f"image {h}x{w} is not divisible by patch size {p}")
    patches = image_to_patches(image, p)
    x = F.linear(patches, params["encoder.patch_embed.weight"], params["encoder.patch_embed.bias"])
    return add_readout_and_position(x, (h // p, w // p), cfg, params)


def mhsa(x: Tensor, params: dict, prefix: str, heads: int, return_attention: bool = False):
    """Multi-head self-attention over the rows of ``x`` (N x D)."""
    n, d = x.shape
    if d % heads:
        raise ValueError(f"dimension {d} not divisible by {heads} heads")
    dh = d // heads
    qkv = F.linear(x, params[f"{prefix}.qkv.weight"], params[f"{prefix}.qkv.bias"])
    qkv = qkv.reshape(n, 3, heads, dh).transpose(1, 2, 0, 3)
    q, k, v = qkv[0], qkv[1], qkv[2]
    scores = F.matmul(q, k.transpose(0, 2, 1)) * (1.0 / np.sqrt(dh))
    attn = F.softmax(scores, axis=-1)
    out = F.matmul(attn, v).transpose(1, 0, 2).reshape(n, d)
    out = F.linear(out, params[f"{prefix}.proj.weight"], params[f"{prefix}.proj.bias"])
    if return_attention:
        return out, attn
    return out


def transformer_layer(x: Tensor, params: dict, prefix: str, cfg: EncoderConfig) -> Tensor:
    """Pre-norm block: ``x + MHSA(LN(x))`` followed by ``+ MLP(LN(.))``."""
    eps = cfg.ln_eps
    h = F.layer_norm(x, params[f"{prefix}.ln1.gamma"], params[f"{prefix}.ln1.beta"], eps)
    x = x + mhsa(h, params, f"{prefix}.attn", cfg.heads)
    h = F.layer_norm(x, params[f"{prefix}.ln2.gamma"], params[f"{prefix}.ln2.beta"], eps)
    h = F.gelu(F.linear(h, params[f"{prefix}.mlp.fc1.weight"], params[f"{prefix}.mlp.fc1.bias"]))
    h = F.linear(h, params[f"{prefix}.mlp.fc2.weight"], params[f"{prefix}.mlp.fc2.bias"])
    return x + h


def encode(image: Tensor, cfg, params: dict) -> list:
    """Run embedding and all transformer layers; return the four hooks.

    ``cfg`` is a :class:`~dpt.config.DptConfig`. Hooks come back shallow to
    deep: :class:`TokenSet` for layer hooks, ``C x H x W`` tensors for the
    hybrid ``R0``/``R1`` taps.
    """
    enc = cfg.encoder
    taps: dict = {}
    if enc.embedder == "hybrid":
        from .hybrid import embed_hybrid

        r0, r1, tokens = embed_hybrid(image, cfg, params)
        taps["R0"], taps["R1"] = r0, r1
    else:
        tokens = embed_patches(image, enc, params)
    x = tokens.tokens
    wanted = {h for h in enc.hooks if isinstance(h, int)}
    last = max(wanted)
    for i in range(last):
        x = transformer_layer(x, params, f"encoder.blocks.{i}", enc)
        if i + 1 in wanted:
            taps[i + 1] = TokenSet(x, tokens.grid, layer=i + 1)
    return [taps[h] for h in enc.hooks]


def attention_maps(image: Tensor, cfg, params: dict, layers=None) -> dict[int, np.ndarray]:
    """Raw attention weights (heads x N x N) for the requested layers."""
    enc = cfg.encoder
    x = embed_patches(image, enc, params).tokens if enc.embedder == "patch" else None
    if x is None:
        from .hybrid import embed_hybrid

        x = embed_hybrid(image, cfg, params)[2].tokens
    layers = set(range(1, enc.depth + 1)) if layers is None else set(layers)
    out = {}
    for i in range(max(layers)):
        prefix = f"encoder.blocks.{i}"
        h = F.layer_norm(x, params[f"{prefix}.ln1.gamma"], params[f"{prefix}.ln1.beta"], enc.ln_eps)
        _, attn = mhsa(h, params, f"{prefix}.attn", enc.heads, return_attention=True)
        if i + 1 in layers:
            out[i + 1] = attn.data.copy()
        x = transformer_layer(x, params, prefix, enc)
    return out
