"""Parameter counts for the published model sizes and a latency benchmark."""

# %%
from dpt import DPT, count_parameters, param_plan
from dpt.bench import TIMING_HEADER, benchmark
from dpt.config import preset
from dpt.params import count_by_group

# %% Counting works from shapes only, so the large model never needs to be allocated.
for name in ("base", "hybrid", "large"):
    plan = param_plan(preset(name))
    groups = ", ".join(f"{k}={v / 1e6:.1f}M" for k, v in count_by_group(plan).items())
    print(f"{name:<7} {count_parameters(plan) / 1e6:7.1f}M  ({groups})")

# %% Latency: the default is 400 timed runs after warmup; a handful is enough here.
model = DPT("toy", seed=0)
print(TIMING_HEADER)
for timing in benchmark(model, [64, 128, 256], runs=5, warmup=1):
    print(timing.row())
