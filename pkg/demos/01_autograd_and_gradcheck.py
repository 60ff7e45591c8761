"""The autograd engine in a few cells: build a graph, backprop, check it."""

# %% A tensor remembers how it was made when any input asks for gradients.
import numpy as np

from dpt import functional as F
from dpt.gradcheck import gradcheck
from dpt.tensor import Tensor

rng = np.random.default_rng(0)
a = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
b = Tensor(rng.standard_normal((3, 2)), requires_grad=True)

loss = F.gelu(F.matmul(a, b)).sum()
loss.backward()
print("loss", loss.item())
print("d loss / d b\n", b.grad)

# %% Convolutions follow the cross-correlation convention (no kernel flip).
x = Tensor(np.ones((1, 2, 2)))
w = Tensor(np.ones((1, 1, 3, 3)))
print("3x3 ones over a padded 2x2 ones map:\n", F.conv2d(x, w, padding=1).data[0])

# %% The transpose convolution is the exact adjoint of conv2d.
x = rng.standard_normal((3, 8, 8))
w = rng.standard_normal((4, 3, 3, 3))
y = rng.standard_normal((4, 4, 4))
lhs = np.vdot(F.conv2d(Tensor(x), Tensor(w), stride=2, padding=1).data, y)
rhs = np.vdot(x, F.conv_transpose2d(Tensor(y), Tensor(w), stride=2, padding=1, output_padding=1).data)
print(f"<conv(x), y> = {lhs:.12f}\n<x, conv^T(y)> = {rhs:.12f}")

# %% Central differences confirm the analytic gradients.
report = gradcheck(lambda: F.layer_norm(a, Tensor(np.ones(3)), Tensor(np.zeros(3))).exp().sum(), [a])
print("layer norm:", report)

# %% A backward rule with a bug is caught immediately.
def square_with_bug(t):
    v = t.data
    return Tensor.from_op(v * v, (t,), lambda g: (g * v,), "square")  # should be 2 * v * g

bad = gradcheck(lambda: square_with_bug(a).sum(), [a])
print("buggy square:", bad)
