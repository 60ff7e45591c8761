"""Walk one image through reassemble, fusion and the depth head."""

# %%
import numpy as np

from dpt import DPT
from dpt.bench import describe
from dpt.config import preset
from dpt.tensor import no_grad

model = DPT({"preset": "toy", "features": 64}, seed=0)
image = np.random.default_rng(2).standard_normal((3, 128, 160)).astype(np.float32)

with no_grad():
    out = model.forward(image, keep_intermediates=True)

# %% Reassemble turns each hook into an image-like map; deeper hooks land at coarser scales.
for scale, fmap in zip(model.cfg.scales, out.pyramid):
    print(f"1/{scale:<2} -> {fmap.shape}")

# %% Fusion climbs back up the pyramid and stops at half the input resolution.
print("decoder output", out.decoded.shape, "penultimate", out.penultimate.shape)
print("depth prediction", out.prediction.shape, "min", out.prediction.data.min())

# %% The same table for the full-size base model comes from the parameter plan alone.
print(describe(preset("base"), 384))
