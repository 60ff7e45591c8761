"""The convolutional embedder: ResNet features become tokens, early stages feed the decoder."""

# %%
import numpy as np

from dpt import DPT
from dpt.hybrid import embed_hybrid
from dpt.tensor import Tensor, no_grad

model = DPT("toy-hybrid", seed=0)
image = Tensor(np.random.default_rng(4).standard_normal((3, 128, 96)).astype(np.float32))

# %% R0 and R1 are taken at 1/4 and 1/8; the token grid sits at 1/16, like 16 x 16 patches.
with no_grad():
    r0, r1, tokens = embed_hybrid(image, model.cfg, model.params)
print("R0", r0.shape, "R1", r1.shape, "tokens", tokens.tokens.shape, "grid", tokens.grid)

# %% Hooks R0 and R1 skip the readout handling and go straight to resampling.
with no_grad():
    out = model.forward(image.data, keep_intermediates=True)
print("hooks:", model.cfg.encoder.hooks)
print("pyramid:", [m.shape for m in out.pyramid])
print("prediction:", out.prediction.shape)
