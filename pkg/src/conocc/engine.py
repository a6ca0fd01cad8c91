"""Dense tensors with tape-based reverse-mode differentiation and Adam.

Only the handful of operations an image autoencoder needs are provided:
same-padded 3x3 convolutions (regular and transposed), affine layers,
relu/sigmoid and a few element-wise reductions. Every operation executed
while a :class:`GradTape` is active, and touching a tensor that requires a
gradient, is appended to that tape; :func:`backward` replays it in reverse.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

_DTYPE = [np.float32]
_TAPES: list["GradTape"] = []


class EngineError(ValueError):
    """Raised for shape mismatches and misuse of the tape."""


@contextlib.contextmanager
def default_dtype(dtype) -> Iterator[None]:
    """Temporarily change the dtype new tensors are created with.

    float32 is the working precision; float64 exists for gradient checking.
    """
    _DTYPE.append(np.dtype(dtype).type)
    try:
        yield
    finally:
        _DTYPE.pop()


def get_default_dtype():
    return _DTYPE[-1]


class Tensor:
    """An n-dimensional array plus a flag saying whether it is trainable."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype or _DTYPE[-1])
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _not_scalar(t: Tensor):
    raise EngineError(f"item() needs a single-element tensor, got shape {t.shape}")


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass
class _Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


class GradTape:
    """Ordered record of operations, used as a context manager.

    >>> with GradTape() as tape:
    ...     loss = sum_(x * x)
    >>> grads = backward(tape, loss, [x])
    """

    def __init__(self) -> None:
        self.nodes: list[_Node] = []
        self._produced: set[int] = set()

    def __enter__(self) -> "GradTape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def ops(self) -> list[str]:
        return [node.op for node in self.nodes]

    def _record(self, op, inputs, output, backward_fn) -> None:
        self.nodes.append(_Node(op, inputs, output, backward_fn))
        self._produced.add(id(output))

    def produced(self, t: Tensor) -> bool:
        return id(t) in self._produced


def _emit(op: str, inputs: Sequence[Tensor], out_data: np.ndarray, backward_fn) -> Tensor:
    out = Tensor(out_data, dtype=out_data.dtype)
    if _TAPES and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPES[-1]._record(op, tuple(inputs), out, backward_fn)
    return out


def backward(tape: GradTape, loss: Tensor, params: Sequence[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Reverse-mode gradients of a scalar ``loss`` recorded on ``tape``.

    Args:
        tape: the tape the forward computation ran under.
        loss: single-element tensor produced through ``tape``.
        params: tensors to return gradients for. Parameters the loss does not
            depend on get zeros. Defaults to every trainable leaf on the tape.

    Returns:
        Mapping from parameter tensor to a gradient array of the same shape.
    """
    if loss.size != 1:
        raise EngineError(f"loss must be scalar, got shape {loss.shape}")
    if not tape.produced(loss):
        raise EngineError("loss was not produced through this tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        in_grads = node.backward(g)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi

    if params is None:
        seen: dict[int, Tensor] = {}
        for node in tape.nodes:
            for t in node.inputs:
                if t.requires_grad and not tape.produced(t):
                    seen.setdefault(id(t), t)
        params = list(seen.values())
    out: dict[Tensor, np.ndarray] = {}
    for p in params:
        g = grads.get(id(p))
        out[p] = np.zeros_like(p.data) if g is None else g.astype(p.data.dtype, copy=False)
    return out


# -- element-wise and reductions ---------------------------------------------

def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise EngineError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "add")
    return _emit("add", (a, b), a.data + b.data,
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _emit("sub", (a, b), a.data - b.data,
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    if not isinstance(b, Tensor) and np.ndim(b) == 0:
        return scale(a, float(b))
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _emit("mul", (a, b), a.data * b.data,
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    c_ = a.data.dtype.type(c)
    return _emit("scale", (a,), a.data * c_, lambda g: (g * c_,))


def square(a: Tensor) -> Tensor:
    return _emit("square", (a,), a.data * a.data, lambda g: (2 * g * a.data,))


def abs_(a: Tensor) -> Tensor:
    return _emit("abs", (a,), np.abs(a.data), lambda g: (g * np.sign(a.data),))


def sum_(a: Tensor, axis: int | tuple[int, ...] | None = None) -> Tensor:
    out = a.data.sum(axis=axis)
    out = np.asarray(out, dtype=a.data.dtype)

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        axes = (axis,) if isinstance(axis, int) else axis
        return (np.broadcast_to(np.expand_dims(g, axes), a.shape).copy(),)

    return _emit("sum", (a,), out, bw)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return scale(sum_(a, axis), 1.0 / count)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = a.data.reshape(shape)
    if out.size != a.size:
        raise EngineError(f"cannot reshape {a.shape} to {shape}")
    return _emit("reshape", (a,), out, lambda g: (g.reshape(a.shape),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _emit("relu", (a,), np.where(mask, a.data, a.data.dtype.type(0)), lambda g: (g * mask,))


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    # exp only ever sees non-positive arguments
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1 / (1 + e), e / (1 + e)).astype(x.dtype, copy=False)


def sigmoid(a: Tensor) -> Tensor:
    s = _stable_sigmoid(a.data)
    return _emit("sigmoid", (a,), s, lambda g: (g * s * (1 - s),))


# -- layers ------------------------------------------------------------------

def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``x @ weight + bias`` for ``x`` of shape [N, K]."""
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise EngineError(f"dense: input {x.shape} incompatible with weight {weight.shape}")
    if bias.shape != (weight.shape[1],):
        raise EngineError(f"dense: bias {bias.shape} does not match weight {weight.shape}")
    out = x.data @ weight.data + bias.data
    return _emit("dense", (x, weight, bias), out,
                 lambda g: (g @ weight.data.T, x.data.T @ g, g.sum(axis=0)))


def _same_pad(size: int, stride: int) -> tuple[int, int]:
    # TensorFlow "same": output ceil(size/stride), surplus padding after
    out = -(-size // stride)
    total = max((out - 1) * stride + 3 - size, 0)
    return total // 2, total - total // 2


def _im2col(xp: np.ndarray, out_h: int, out_w: int, stride: int) -> np.ndarray:
    """Padded [N,C,Hp,Wp] -> [N*out_h*out_w, C*9] patch matrix."""
    n, c = xp.shape[:2]
    cols = np.empty((n, out_h, out_w, c, 3, 3), dtype=xp.dtype)
    for i in range(3):
        for j in range(3):
            patch = xp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride]
            cols[:, :, :, :, i, j] = patch.transpose(0, 2, 3, 1)
    return cols.reshape(n * out_h * out_w, c * 9)


def _col2im(cols: np.ndarray, padded_shape: tuple[int, ...], out_h: int, out_w: int, stride: int) -> np.ndarray:
    """Adjoint of :func:`_im2col`: scatter-add patches back into a padded image."""
    n, c = padded_shape[:2]
    cols = cols.reshape(n, out_h, out_w, c, 3, 3)
    xp = np.zeros(padded_shape, dtype=cols.dtype)
    for i in range(3):
        for j in range(3):
            xp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return xp


def _check_stride(stride: int, op: str) -> None:
    if stride not in (1, 2):
        raise EngineError(f"{op}: stride must be 1 or 2, got {stride}")


def _conv_forward(x: np.ndarray, k: np.ndarray, stride: int):
    n, c, h, w = x.shape
    f = k.shape[0]
    (pt, pb), (pl, pr) = _same_pad(h, stride), _same_pad(w, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    oh, ow = -(-h // stride), -(-w // stride)
    cols = _im2col(xp, oh, ow, stride)
    out = cols @ k.reshape(f, c * 9).T
    return out.reshape(n, oh, ow, f).transpose(0, 3, 1, 2), cols, xp.shape, (pt, pl)


def _conv_input_grad(g: np.ndarray, k: np.ndarray, in_shape, stride: int) -> np.ndarray:
    n, c, h, w = in_shape
    f, oh, ow = g.shape[1:]
    (pt, pb), (pl, pr) = _same_pad(h, stride), _same_pad(w, stride)
    gm = g.transpose(0, 2, 3, 1).reshape(-1, f)
    dcols = gm @ k.reshape(f, c * 9)
    xp = _col2im(dcols, (n, c, h + pt + pb, w + pl + pr), oh, ow, stride)
    return xp[:, :, pt:pt + h, pl:pl + w]


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1) -> Tensor:
    """Same-padded 3x3 cross-correlation.

    Args:
        x: [N, C, H, W] input.
        kernel: [F, C, 3, 3] filters.
        bias: [F] per-filter offsets.
        stride: 1 or 2; output spatial size is ``ceil(H / stride)``.
    """
    _check_stride(stride, "conv2d")
    if x.data.ndim != 4:
        raise EngineError(f"conv2d: input must be [N,C,H,W], got {x.shape}")
    if kernel.data.ndim != 4 or kernel.shape[2:] != (3, 3):
        raise EngineError(f"conv2d: kernel must be [F,C,3,3], got {kernel.shape}")
    if kernel.shape[1] != x.shape[1]:
        raise EngineError(f"conv2d: input has {x.shape[1]} channels but kernel expects {kernel.shape[1]}")
    if bias.shape != (kernel.shape[0],):
        raise EngineError(f"conv2d: bias {bias.shape} does not match {kernel.shape[0]} filters")
    out, cols, _, _ = _conv_forward(x.data, kernel.data, stride)
    out = out + bias.data[None, :, None, None]
    f, c = kernel.shape[:2]

    def bw(g):
        gm = g.transpose(0, 2, 3, 1).reshape(-1, f)
        dk = (gm.T @ cols).reshape(f, c, 3, 3)
        dx = _conv_input_grad(g, kernel.data, x.shape, stride) if x.requires_grad else None
        return dx, dk, g.sum(axis=(0, 2, 3))

    return _emit("conv2d", (x, kernel, bias), np.ascontiguousarray(out), bw)


def conv2d_transpose(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1) -> Tensor:
    """Fractionally strided 3x3 convolution, the adjoint of :func:`conv2d`.

    Args:
        x: [N, C, H, W] input.
        kernel: [C, F, 3, 3]; the same array, used in ``conv2d`` as an F -> C
            filter bank, has this operation as its input gradient.
        bias: [F].
        stride: 1 or 2; output spatial size is ``H * stride``.
    """
    _check_stride(stride, "conv2d_transpose")
    if x.data.ndim != 4:
        raise EngineError(f"conv2d_transpose: input must be [N,C,H,W], got {x.shape}")
    if kernel.data.ndim != 4 or kernel.shape[2:] != (3, 3):
        raise EngineError(f"conv2d_transpose: kernel must be [C,F,3,3], got {kernel.shape}")
    if kernel.shape[0] != x.shape[1]:
        raise EngineError(f"conv2d_transpose: input has {x.shape[1]} channels but kernel expects {kernel.shape[0]}")
    if bias.shape != (kernel.shape[1],):
        raise EngineError(f"conv2d_transpose: bias {bias.shape} does not match {kernel.shape[1]} filters")
    n, c, h, w = x.shape
    f = kernel.shape[1]
    out_shape = (n, f, h * stride, w * stride)
    out = _conv_input_grad(x.data, kernel.data, out_shape, stride)
    out = out + bias.data[None, :, None, None]

    def bw(g):
        dx, gcols, _, _ = _conv_forward(g, kernel.data, stride)
        xm = x.data.transpose(0, 2, 3, 1).reshape(-1, c)
        dk = (xm.T @ gcols).reshape(c, f, 3, 3)
        return dx, dk, g.sum(axis=(0, 2, 3))

    return _emit("conv2d_transpose", (x, kernel, bias), np.ascontiguousarray(out), bw)


# -- optimizer ---------------------------------------------------------------

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **kw) -> "AdamState":
        return cls([np.zeros_like(p.data) for p in params], [np.zeros_like(p.data) for p in params], **kw)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray] | dict[Tensor, np.ndarray], state: AdamState,
              lr: float) -> AdamState:
    """One bias-corrected Adam update.

    ``grads`` is aligned with ``params`` or is the dict returned by :func:`backward`.
    Each parameter's ``data`` is rebound to a fresh array; arrays already
    handed out (e.g. to a checkpoint) are never written to.
    """
    if isinstance(grads, dict):
        grads = [grads[p] for p in params]
    if not (len(params) == len(grads) == len(state.m)):
        raise EngineError("adam_step: params, grads and state differ in length")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != np.shape(g) or p.shape != m.shape:
            raise EngineError(f"adam_step: shape mismatch for {p.name or 'param'}: {p.shape} vs {np.shape(g)}")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1 - b1 ** t
    c2 = 1 - b2 ** t
    new_m, new_v = [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        dt = p.data.dtype.type
        m = dt(b1) * m + dt(1 - b1) * g
        v = dt(b2) * v + dt(1 - b2) * (g * g)
        m_hat = m / dt(c1)
        v_hat = v / dt(c2)
        p.data = p.data - dt(lr) * m_hat / (np.sqrt(v_hat) + dt(state.eps))
        new_m.append(m)
        new_v.append(v)
    state.m, state.v, state.step = new_m, new_v, t
    return state
