"""From pixels to tokens: patch embedding, readout token, position grids."""

# %%
import numpy as np

from dpt import DPT
from dpt.encoder import attention_maps, embed_patches, encode, interpolate_pos_embed
from dpt.tensor import Tensor, no_grad

model = DPT("toy", seed=0)
cfg = model.cfg
print("toy encoder:", cfg.encoder)

# %% A 384 x 384 image cut into 16 x 16 patches gives 24 x 24 = 576 tokens, plus one readout row.
image = Tensor(np.random.default_rng(1).standard_normal((3, 384, 384)).astype(np.float32))
with no_grad():
    tokens = embed_patches(image, cfg.encoder, model.params)
print("grid", tokens.grid, "token matrix", tokens.tokens.shape)

# %% The position embedding is learned on a 4 x 4 grid; other sizes are bilinearly resized.
pos = model.params["encoder.pos_embed"]
same = interpolate_pos_embed(pos, (4, 4), (4, 4))
print("same-size resize is bit-exact:", same.data.tobytes() == pos.data.tobytes())
print("resized to 30 x 30:", interpolate_pos_embed(pos, (4, 4), (30, 30)).shape)

# %% Every transformer layer keeps the token count; the four hook layers are tapped for the decoder.
with no_grad():
    hooks = encode(Tensor(np.zeros((3, 480, 480), np.float32)), cfg, model.params)
for h in hooks:
    print(f"hook after layer {h.layer}: {h.tokens.shape}")

# %% Raw attention weights can be dumped for inspection.
maps = attention_maps(Tensor(np.zeros((3, 64, 64), np.float32)), cfg, model.params, layers=[4])
print("layer 4 attention (heads x tokens x tokens):", maps[4].shape, "row sums", maps[4].sum(-1)[0, :3])
