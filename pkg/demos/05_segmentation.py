"""Semantic segmentation: logits, the auxiliary head and mIoU."""

# %%
import numpy as np

from dpt import DPT, seg_metrics
from dpt.losses import segmentation_loss

model = DPT({"preset": "toy", "head": "segmentation", "num_classes": 5}, seed=0)
image = np.random.default_rng(3).standard_normal((3, 64, 64)).astype(np.float32)

# %% Training mode enables dropout (seeded) and batch statistics, and returns auxiliary logits.
out = model.forward(image, training=True, rng=np.random.default_rng(0))
labels = (np.arange(64)[:, None] // 13 + np.zeros((1, 64), int)) % 5
loss = segmentation_loss(out.prediction, out.aux_logits, labels)
print("logits", out.prediction.shape, "aux", out.aux_logits.shape, "loss", loss.item())

# %% Inference is deterministic; argmax over classes gives the label map.
pred = model.predict(image).argmax(axis=0)
print(seg_metrics(pred, labels, 5))

# %% The small worked example: one wrong pixel out of four.
m = seg_metrics(np.array([[0, 0], [1, 1]]), np.array([[0, 1], [1, 1]]), 2)
print(f"pix_acc={m.pix_acc} per-class IoU={m.per_class_iou} mIoU={m.miou:.4f}")
