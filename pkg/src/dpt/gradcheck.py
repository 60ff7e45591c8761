"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradcheckReport:
    max_rel_error: float
    tol: float
    checked: int
    floor: float = 0.0
    per_leaf: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} max_rel_err={self.max_rel_error:.3e} tol={self.tol:.0e} elements={self.checked}"


def _loss_value(f: Callable[[], Tensor]) -> float:
    value = f()
    out = float(np.asarray(value.data if isinstance(value, Tensor) else value).reshape(()))
    if not np.isfinite(out):
        raise FloatingPointError("loss is not finite at a perturbed point")
    return out


def gradcheck(
    f: Callable[[], Tensor],
    leaves: Sequence[Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_per_leaf: int | None = None,
    floor: float = 1e-6,
    rng: np.random.Generator | None = None,
    names: Sequence[str] | None = None,
) -> GradcheckReport:
    """Compare backprop gradients of ``f()`` against central differences.

    ``f`` takes no arguments and must read the current contents of
    ``leaves``; entries are perturbed in place and restored. The relative
    error of one element is ``|a - n| / max(|a|, |n|, floor)``. The floor
    is raised to the rounding noise of a central difference of the loss,
    ``64 * eps * max(|f|, 1) / (h * tol)``, so that gradients that are exactly
    zero (e.g. attention key biases) are not compared against noise. With
    ``max_per_leaf`` set, that many randomly chosen elements of each leaf are
    checked instead of all of them.
    """
    for leaf in leaves:
        if leaf.dtype != np.float64:
            raise TypeError("gradcheck requires float64 leaves")
        leaf.requires_grad = True
        leaf.grad = None
        if not leaf.data.flags.c_contiguous:
            leaf.data = np.ascontiguousarray(leaf.data)
    loss = f()
    loss.backward()
    noise = 64 * np.finfo(np.float64).eps * max(abs(float(loss.data.reshape(()))), 1.0) / h
    floor = max(floor, noise / tol)
    analytic = [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]

    rng = rng if rng is not None else np.random.default_rng(0)
    names = list(names) if names is not None else [f"leaf{i}" for i in range(len(leaves))]
    worst = 0.0
    checked = 0
    per_leaf: dict[str, float] = {}
    for name, leaf, grad in zip(names, leaves, analytic):
        flat = leaf.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_leaf is not None and flat.size > max_per_leaf:
            idx = rng.choice(flat.size, size=max_per_leaf, replace=False)
        leaf_worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            up = _loss_value(f)
            flat[i] = orig - h
            down = _loss_value(f)
            flat[i] = orig
            numeric = (up - down) / (2 * h)
            a = grad.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            leaf_worst = max(leaf_worst, err)
        per_leaf[name] = leaf_worst
        worst = max(worst, leaf_worst)
        checked += len(idx)
    return GradcheckReport(max_rel_error=float(worst), tol=tol, checked=checked, per_leaf=per_leaf, floor=floor)
