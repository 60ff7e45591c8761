"""Depth inference with the command-line tool, then scoring against ground truth."""

# %%
import tempfile
from pathlib import Path

import numpy as np

from dpt import imageio
from dpt.cli import main
from dpt.train import synthetic_depth_sample

work = Path(tempfile.mkdtemp())
image, inv_depth = synthetic_depth_sample(96)
rgb = np.clip(np.rint((image - image.min()) / np.ptp(image) * 255), 0, 255).astype(np.uint16)
imageio.write_pnm(work / "scene.ppm", rgb)
imageio.write_raw(work / "depth.raw", 1.0 / inv_depth)

# %% Fresh weights go into an archive; inference reads them back.
main(["init-weights", "--preset", "toy", "--seed", "0", "--out", str(work / "toy.dptw")])
main(["infer", "--preset", "toy", "--weights", str(work / "toy.dptw"),
      "--image", str(work / "scene.ppm"), "--out", str(work / "pred.raw")])

# %% Inputs that are not multiples of 32 need --auto-pad.
imageio.write_pnm(work / "odd.ppm", rgb[:, :90, :70])
print("exit code without auto-pad:", main(["infer", "--preset", "toy", "--image", str(work / "odd.ppm"),
                                           "--out", str(work / "odd.raw")]))
main(["infer", "--preset", "toy", "--image", str(work / "odd.ppm"), "--out", str(work / "odd.raw"), "--auto-pad"])

# %% Evaluation aligns the inverse-depth prediction to the ground truth before computing errors.
main(["eval", "--pred", str(work / "pred.raw"), "--gt", str(work / "depth.raw"), "--json", str(work / "report.json")])
print((work / "report.json").read_text()[:200], "...")
