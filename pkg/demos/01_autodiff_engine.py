"""
Reverse-mode autodiff on numpy arrays
=====================================

Operations run eagerly; inside a ``GradTape`` they are also recorded so
``backward`` can walk them in reverse.
"""
import numpy as np

from conocc import engine as E

rng = np.random.default_rng(0)

# a tiny conv -> relu -> dense -> squared-error graph
x = E.Tensor(rng.random((2, 1, 8, 8)))
kernel = E.Tensor(rng.standard_normal((4, 1, 3, 3)) * 0.3, requires_grad=True, name="kernel")
bias = E.Tensor(np.zeros(4), requires_grad=True, name="bias")
w = E.Tensor(rng.standard_normal((4 * 4 * 4, 3)) * 0.1, requires_grad=True, name="w")

with E.GradTape() as tape:
    h = E.relu(E.conv2d(x, kernel, bias, stride=2))   # "same" padding: 8x8 -> 4x4
    out = E.dense(E.reshape(h, (2, -1)), w, E.Tensor(np.zeros(3)))
    loss = E.mean(E.sum_(E.square(out), axis=1))

print("recorded ops:", tape.ops())
grads = E.backward(tape, loss)
for p in (kernel, bias, w):
    print(f"{p.name:>6}: grad shape {grads[p].shape}, norm {np.linalg.norm(grads[p]):.4f}")

# the transposed convolution undoes the stride-2 downsampling in shape
up = E.conv2d_transpose(h, E.Tensor(rng.standard_normal((4, 1, 3, 3))), E.Tensor(np.zeros(1)), stride=2)
print("conv2d_transpose:", h.shape, "->", up.shape)

# central differences in float64 agree with the tape
with E.default_dtype(np.float64):
    a = E.Tensor(rng.standard_normal(5), requires_grad=True)
    with E.GradTape() as tape:
        s = E.sum_(E.sigmoid(a))
    g = E.backward(tape, s)[a]
    eps = 1e-6
    fd = np.array([(1 / (1 + np.exp(-(a.data[i] + eps))) - 1 / (1 + np.exp(-(a.data[i] - eps)))) / (2 * eps)
                   for i in range(5)])
print("sigmoid grad max deviation from finite differences:", np.abs(g - fd).max())

# Adam drives a quadratic to its minimum
p = E.Tensor(np.array([3.0, -2.0]), requires_grad=True)
state = E.AdamState.for_params([p])
for step in range(500):
    with E.GradTape() as tape:
        q = E.sum_(E.square(p))
    E.adam_step([p], E.backward(tape, q), state, lr=0.05)
print("Adam after 500 steps:", p.data)
