"""Affine alignment, depth errors, ordinal disagreement and relative improvement."""

# %%
import numpy as np

from dpt import DepthEvalPair, OrdinalPair, align_affine_lsq, depth_metrics, relative_improvement, whdr

# %% Least squares recovers the scale and shift of an affine copy exactly.
print("fit of [1, 2] onto [3, 5]:", align_affine_lsq([1.0, 2.0], [3.0, 5.0]))

rng = np.random.default_rng(5)
depth = rng.uniform(1.0, 10.0, (32, 32))
prediction = 0.25 / depth - 0.1  # inverse depth up to scale and shift
pair = DepthEvalPair(prediction, depth)
print("scale, shift:", pair.align())
print(depth_metrics(pair))

# %% A noisy prediction: delta_acc counts pixels within 1.25^k, delta_err is the complement in percent.
noisy = DepthEvalPair(prediction * rng.uniform(0.8, 1.25, depth.shape), depth)
m = depth_metrics(noisy)
print("delta_acc", m.delta_acc, "delta_err %", [round(v, 2) for v in m.delta_err])

# %% WHDR: the fraction of annotated "which point is closer" pairs the prediction gets wrong.
pairs = [OrdinalPair((0, 0), (5, 5), "a_closer" if depth[0, 0] < depth[5, 5] else "b_closer"),
         OrdinalPair((1, 2), (9, 9), "a_closer")]
print("WHDR", whdr(prediction, pairs))

# %% Relative improvement over a baseline, as used when comparing error columns.
for new, base in ((8.46, 23.90), (11.56, 23.90)):
    print(f"{new} vs {base}: {relative_improvement(new, base):+.1f}%")
