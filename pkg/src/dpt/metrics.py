"""Depth and segmentation evaluation metrics.

Everything here works on plain numpy arrays in float64.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

DELTA_BASE = 1.25
WHDR_MARGIN = 0.03
DEPTH_FLOOR = 1e-8


class DegenerateAlignment(ValueError):
    """The prediction has (near) zero variance over the mask."""


@dataclass
class DepthEvalPair:
    """Prediction (inverse depth) and ground-truth depth with a validity mask."""

    prediction: np.ndarray
    ground_truth: np.ndarray
    valid_mask: np.ndarray | None = None

    def __post_init__(self):
        self.prediction = np.asarray(self.prediction, dtype=np.float64)
        self.ground_truth = np.asarray(self.ground_truth, dtype=np.float64)
        if self.prediction.shape != self.ground_truth.shape:
            raise ValueError(f"shape mismatch {self.prediction.shape} vs {self.ground_truth.shape}")
        if self.valid_mask is None:
            self.valid_mask = self.ground_truth > 0
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if self.valid_mask.shape != self.prediction.shape:
            raise ValueError("mask shape does not match prediction")
        if np.any(self.ground_truth[self.valid_mask] <= 0):
            raise ValueError("masked-in ground truth must be strictly positive")

    def inverse_ground_truth(self) -> np.ndarray:
        out = np.zeros_like(self.ground_truth)
        out[self.valid_mask] = 1.0 / self.ground_truth[self.valid_mask]
        return out

    def align(self) -> tuple[float, float]:
        """Scale and shift mapping the prediction onto inverse ground truth."""
        return align_affine_lsq(self.prediction, self.inverse_ground_truth(), self.valid_mask)


def align_affine_lsq(prediction, target, mask=None) -> tuple[float, float]:
    """Least-squares ``(s, t)`` minimising ``sum((s * p + t - g)^2)`` over the mask."""
    p = np.asarray(prediction, dtype=np.float64)
    g = np.asarray(target, dtype=np.float64)
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        p, g = p[m], g[m]
    else:
        p, g = p.ravel(), g.ravel()
    n = p.size
    if n < 2:
        raise DegenerateAlignment("need at least two valid pixels")
    a00, a01, a11 = np.dot(p, p), p.sum(), float(n)
    b0, b1 = np.dot(p, g), g.sum()
    det = a00 * a11 - a01 * a01
    if det <= 1e-12 * max(a00 * a11, 1e-300):
        raise DegenerateAlignment("prediction is constant over the mask")
    s = (a11 * b0 - a01 * b1) / det
    t = (a00 * b1 - a01 * b0) / det
    return float(s), float(t)


def batch_align_average(pairs) -> tuple[float, float]:
    """Mean of the per-pair scales and shifts."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no pairs to align")
    fits = np.array([pair.align() for pair in pairs])
    return float(fits[:, 0].mean()), float(fits[:, 1].mean())


@dataclass
class DepthMetrics:
    abs_rel: float
    rmse: float
    rmse_log: float
    log10: float
    delta_acc: list = field(default_factory=list)
    delta_err: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def aligned_depth(pair: DepthEvalPair, scale=None, shift=None, floor: float = DEPTH_FLOOR) -> np.ndarray:
    """Align the inverse-depth prediction and convert it to depth."""
    if scale is None or shift is None:
        scale, shift = pair.align()
    inv = scale * pair.prediction + shift
    return 1.0 / np.maximum(inv, floor)


def _mean(values: np.ndarray) -> float:
    return math.fsum(values.tolist()) / values.size


def depth_metrics(pair: DepthEvalPair, aligned: bool = True, scale=None, shift=None) -> DepthMetrics:
    """Standard depth errors over the valid mask, in the depth domain.

    With ``aligned=True`` the prediction is treated as affine-ambiguous
    inverse depth and aligned first; otherwise it is compared as depth.
    """
    m = pair.valid_mask
    if not m.any():
        raise ValueError("empty mask")
    pred = aligned_depth(pair, scale, shift) if aligned else pair.prediction
    p, g = pred[m], pair.ground_truth[m]
    if np.any(p <= 0):
        raise ValueError("predicted depth must be positive over the mask")
    n = p.size
    ratio = np.maximum(p / g, g / p)
    acc = [int(np.count_nonzero(ratio < DELTA_BASE**k)) / n for k in (1, 2, 3)]
    # correctly rounded sums make the result independent of summation order
    return DepthMetrics(
        abs_rel=_mean(np.abs(p - g) / g),
        rmse=math.sqrt(_mean((p - g) ** 2)),
        rmse_log=math.sqrt(_mean((np.log(p) - np.log(g)) ** 2)),
        log10=_mean(np.abs(np.log10(p) - np.log10(g))),
        delta_acc=acc,
        delta_err=[100.0 * (1.0 - a) for a in acc],
    )


def relative_abs_deviation(pair: DepthEvalPair) -> float:
    """Mean ``|s p + t - g| / g`` in inverse-depth space after alignment."""
    s, t = pair.align()
    g = pair.inverse_ground_truth()[pair.valid_mask]
    p = s * pair.prediction[pair.valid_mask] + t
    return float(np.mean(np.abs(p - g) / g))


@dataclass(frozen=True)
class OrdinalPair:
    point_a: tuple
    point_b: tuple
    relation: str  # "a_closer" | "b_closer"

    def __post_init__(self):
        if self.relation not in ("a_closer", "b_closer"):
            raise ValueError(f"relation must be a_closer or b_closer, got {self.relation!r}")


def ordinal_relation(pred: np.ndarray, pair: OrdinalPair, margin: float = WHDR_MARGIN) -> str:
    """Ordinal relation implied by an inverse-depth map (larger is closer)."""
    a = pred[tuple(pair.point_a)]
    b = pred[tuple(pair.point_b)]
    if a > b * (1.0 + margin):
        return "a_closer"
    if b > a * (1.0 + margin):
        return "b_closer"
    return "equal"


def whdr(pred, pairs, margin: float = WHDR_MARGIN) -> float:
    """Fraction of ordinal pairs whose predicted relation disagrees with the label."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no ordinal pairs")
    pred = np.asarray(pred, dtype=np.float64)
    h, w = pred.shape
    wrong = 0
    for pair in pairs:
        for y, x in (pair.point_a, pair.point_b):
            if not (0 <= y < h and 0 <= x < w):
                raise ValueError(f"point {(y, x)} outside {h}x{w} image")
        wrong += ordinal_relation(pred, pair, margin) != pair.relation
    return wrong / len(pairs)


@dataclass
class SegMetrics:
    pix_acc: float
    miou: float
    per_class_iou: list

    def to_dict(self) -> dict:
        return asdict(self)


def confusion_matrix(pred_labels, gt_labels, num_classes: int, ignore_label: int = 255) -> np.ndarray:
    """``num_classes x num_classes`` counts, rows indexed by ground truth."""
    pred = np.asarray(pred_labels).ravel().astype(np.int64)
    gt = np.asarray(gt_labels).ravel().astype(np.int64)
    if pred.shape != gt.shape:
        raise ValueError("label maps differ in size")
    keep = gt != ignore_label
    pred, gt = pred[keep], gt[keep]
    if ((gt < 0) | (gt >= num_classes)).any() or ((pred < 0) | (pred >= num_classes)).any():
        raise ValueError(f"labels must lie in [0, {num_classes}) or equal {ignore_label}")
    return np.bincount(gt * num_classes + pred, minlength=num_classes**2).reshape(num_classes, num_classes)


def seg_metrics(pred_labels, gt_labels, num_classes: int, ignore_label: int = 255) -> SegMetrics:
    """Pixel accuracy and mean IoU over classes with a non-empty union."""
    cm = confusion_matrix(pred_labels, gt_labels, num_classes, ignore_label)
    total = cm.sum()
    if total == 0:
        raise ValueError("no valid pixels")
    inter = np.diag(cm).astype(np.float64)
    union = cm.sum(axis=0) + cm.sum(axis=1) - np.diag(cm)
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / np.maximum(union, 1), np.nan)
    return SegMetrics(
        pix_acc=float(inter.sum() / total),
        miou=_mean(iou[~np.isnan(iou)]),
        per_class_iou=[None if np.isnan(v) else float(v) for v in iou],
    )


def relative_improvement(new_value: float, baseline_value: float) -> float:
    """Percent change of ``new_value`` relative to ``baseline_value``."""
    if baseline_value == 0:
        raise ZeroDivisionError("baseline value is zero")
    return 100.0 * (new_value - baseline_value) / baseline_value


def _flatten(record: dict, prefix: str = "") -> list[tuple[str, object]]:
    items = []
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            items.extend(_flatten(value, f"{name}."))
        elif isinstance(value, (list, tuple)):
            items.extend((f"{name}[{i}]", v) for i, v in enumerate(value))
        else:
            items.append((name, value))
    return items


def format_report(record: dict) -> str:
    """Line-oriented ``key=value`` text."""
    lines = []
    for key, value in _flatten(record):
        if isinstance(value, float):
            value = f"{value:.6g}"
        lines.append(f"{key}={value}")
    return "\n".join(lines)


def report_json(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True)
