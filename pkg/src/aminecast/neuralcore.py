"""Minimal dense-tensor reverse-mode autodiff with LSTM-family cells.

Float64 everywhere and strictly single-threaded graph evaluation, so the
same seed reproduces forward and backward results bit for bit. The op set
is only what the four forecasting architectures need: elementwise
arithmetic with broadcasting, 2-D matmul, sigmoid/tanh, axis slicing and
concatenation, reductions, and a same-padded 1-D convolution over the
feature axis for the convolutional cell.

Gradients flow through a tape built implicitly as ops run; `backward` on a
scalar walks the graph in reverse topological order. Inside `no_grad()` no
graph is recorded, which keeps inference cheap.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class NeuralError(Exception):
    pass


class ShapeError(NeuralError):
    pass


class UsageError(NeuralError):
    pass


_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording (inference mode)."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    """A float64 array plus the graph edge that produced it."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple["Tensor", ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return self.data.item()

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every reachable parameter."""
        if self.data.size != 1:
            raise UsageError("backward() requires a scalar loss")
        if not self.requires_grad:
            raise UsageError("backward() on a tensor with no recorded graph")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen and parent._backward is not None:
                    stack.append((parent, False))
                elif id(parent) not in seen:
                    # Leaf: record once so gradient accumulation reaches it.
                    seen.add(id(parent))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar used throughout the cells.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return neg(self)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def constant(data) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64, copy=True), requires_grad=True)


def _accumulate(target: Tensor, grad: np.ndarray) -> None:
    if target.grad is None:
        target.grad = np.zeros_like(target.data)
    target.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the parent shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _node(data: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    requires = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires)
    if requires:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def add(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    data = a.data + b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g, b.shape))

    return _node(data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    data = a.data - b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g, b.shape))

    return _node(data, (a, b), backward)


def neg(a) -> Tensor:
    a = constant(a)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, -g)

    return _node(-a.data, (a,), backward)


def mul(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    data = a.data * b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _node(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _node(data, (a, b), backward)


def transpose(a) -> Tensor:
    a = constant(a)
    if a.ndim != 2:
        raise ShapeError("transpose expects a 2-D tensor")

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g.T)

    return _node(a.data.T, (a,), backward)


def sigmoid(a) -> Tensor:
    a = constant(a)
    # Numerically stable logistic; exact enough for finite-difference checks.
    data = np.empty_like(a.data)
    pos = a.data >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    data[~pos] = ex / (1.0 + ex)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g * data * (1.0 - data))

    return _node(data, (a,), backward)


def tanh(a) -> Tensor:
    a = constant(a)
    data = np.tanh(a.data)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g * (1.0 - data * data))

    return _node(data, (a,), backward)


def narrow(a, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis."""
    a = constant(a)
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[index] = g
            _accumulate(a, full)

    return _node(a.data[index], (a,), backward)


def concat(tensors: Sequence, axis: int) -> Tensor:
    parts = [constant(t) for t in tensors]
    data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]

    def backward(g: np.ndarray) -> None:
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(offset, offset + size)
                _accumulate(p, g[tuple(index)])
            offset += size

    return _node(data, parts, backward)


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = constant(a)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, g.reshape(a.shape))

    return _node(a.data.reshape(shape), (a,), backward)


def mean_all(a) -> Tensor:
    a = constant(a)
    n = a.data.size

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, np.full(a.shape, float(g) / n))

    return _node(np.asarray(a.data.mean()), (a,), backward)


def sum_all(a) -> Tensor:
    a = constant(a)

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, np.full(a.shape, float(g)))

    return _node(np.asarray(a.data.sum()), (a,), backward)


def mean_axis(a, axis: int) -> Tensor:
    a = constant(a)
    n = a.shape[axis]

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            _accumulate(a, np.repeat(np.expand_dims(g / n, axis), n, axis=axis))

    return _node(a.data.mean(axis=axis), (a,), backward)


def conv1d_same(x, kernel) -> Tensor:
    """Same-padded 1-D convolution along the trailing (feature) axis.

    x: (B, C_in, L), kernel: (C_out, C_in, k) with odd k; output (B, C_out, L).
    Implemented as a correlation over zero-padded input, matching the
    documented cell equations.
    """
    x, kernel = constant(x), constant(kernel)
    if x.ndim != 3 or kernel.ndim != 3:
        raise ShapeError("conv1d_same expects (B, C, L) input and (O, C, k) kernel")
    batch, c_in, length = x.shape
    c_out, kc_in, k = kernel.shape
    if kc_in != c_in:
        raise ShapeError(f"kernel channels {kc_in} != input channels {c_in}")
    if k % 2 != 1:
        raise ShapeError("kernel width must be odd for same padding")
    pad = (k - 1) // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad)))
    cols = sliding_window_view(xp, k, axis=2)  # (B, C_in, L, k)
    data = np.einsum("bclk,ock->bol", cols, kernel.data, optimize=True)

    def backward(g: np.ndarray) -> None:
        if kernel.requires_grad:
            _accumulate(kernel, np.einsum("bol,bclk->ock", g, cols, optimize=True))
        if x.requires_grad:
            gp = np.pad(g, ((0, 0), (0, 0), (pad, pad)))
            gcols = sliding_window_view(gp, k, axis=2)  # (B, C_out, L, k)
            flipped = kernel.data[:, :, ::-1]
            _accumulate(x, np.einsum("bolk,ock->bcl", gcols, flipped, optimize=True))

    return _node(data, (x, kernel), backward)


# ---------------------------------------------------------------------------
# Recurrent cells. Gate order is fixed as (input, forget, candidate, output)
# in the concatenated 4h axis; the serialized format relies on it.
# ---------------------------------------------------------------------------


@dataclass
class LstmCellParams:
    """W: (4h, d) input weights, U: (4h, h) state weights, b: (4h,) biases."""

    W: Tensor
    U: Tensor
    b: Tensor
    hidden: int
    input_dim: int

    @classmethod
    def init(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> "LstmCellParams":
        bound = 1.0 / math.sqrt(hidden)
        W = parameter(rng.uniform(-bound, bound, size=(4 * hidden, input_dim)))
        U = parameter(rng.uniform(-bound, bound, size=(4 * hidden, hidden)))
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0  # open forget gate at init
        return cls(W, U, parameter(b), hidden, input_dim)

    def tensors(self) -> tuple[Tensor, Tensor, Tensor]:
        return self.W, self.U, self.b


def lstm_cell_step(params: LstmCellParams, x_t, h_prev, c_prev) -> tuple[Tensor, Tensor]:
    """One step of the standard cell: c = f*c_prev + i*g, h = o*tanh(c)."""
    x_t, h_prev, c_prev = constant(x_t), constant(h_prev), constant(c_prev)
    h = params.hidden
    if x_t.shape[-1] != params.input_dim:
        raise ShapeError(f"input dim {x_t.shape[-1]} != cell input dim {params.input_dim}")
    z = add(add(matmul(x_t, transpose(params.W)), matmul(h_prev, transpose(params.U))), params.b)
    i = sigmoid(narrow(z, 1, 0, h))
    f = sigmoid(narrow(z, 1, h, 2 * h))
    g = tanh(narrow(z, 1, 2 * h, 3 * h))
    o = sigmoid(narrow(z, 1, 3 * h, 4 * h))
    c_t = add(mul(f, c_prev), mul(i, g))
    h_t = mul(o, tanh(c_t))
    return h_t, c_t


@dataclass
class ConvLstmCellParams:
    """Per-gate 1-D conv kernels over the feature axis.

    Wk: (4*hc, c_in, k) input-to-state, Uk: (4*hc, hc, k) state-to-state,
    b: (4*hc,). Same padding keeps the feature length unchanged.
    """

    Wk: Tensor
    Uk: Tensor
    b: Tensor
    channels: int
    in_channels: int
    kernel: int

    @classmethod
    def init(
        cls, in_channels: int, channels: int, kernel: int, rng: np.random.Generator
    ) -> "ConvLstmCellParams":
        if kernel % 2 != 1:
            raise ShapeError("conv kernel width must be odd")
        bound = 1.0 / math.sqrt(channels)
        Wk = parameter(rng.uniform(-bound, bound, size=(4 * channels, in_channels, kernel)))
        Uk = parameter(rng.uniform(-bound, bound, size=(4 * channels, channels, kernel)))
        b = np.zeros(4 * channels)
        b[channels : 2 * channels] = 1.0
        return cls(Wk, Uk, parameter(b), channels, in_channels, kernel)

    def tensors(self) -> tuple[Tensor, Tensor, Tensor]:
        return self.Wk, self.Uk, self.b


def conv_lstm_cell_step(params: ConvLstmCellParams, x_t, h_prev, c_prev) -> tuple[Tensor, Tensor]:
    """Convolutional cell step; states are (B, hc, L) over feature positions."""
    x_t, h_prev, c_prev = constant(x_t), constant(h_prev), constant(c_prev)
    hc = params.channels
    bias = reshape(params.b, (4 * hc, 1))
    z = add(add(conv1d_same(x_t, params.Wk), conv1d_same(h_prev, params.Uk)), bias)
    i = sigmoid(narrow(z, 1, 0, hc))
    f = sigmoid(narrow(z, 1, hc, 2 * hc))
    g = tanh(narrow(z, 1, 2 * hc, 3 * hc))
    o = sigmoid(narrow(z, 1, 3 * hc, 4 * hc))
    c_t = add(mul(f, c_prev), mul(i, g))
    h_t = mul(o, tanh(c_t))
    return h_t, c_t


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean squared error of a prediction vector against constants."""
    target = np.asarray(target, dtype=np.float64)
    if target.size == 0:
        raise UsageError("mse_loss on empty vectors")
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} vs target {target.shape}")
    diff = sub(pred, constant(target))
    return mean_all(mul(diff, diff))


class Adam:
    """Bias-corrected Adam over a named parameter dict."""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.step_count
        bias2 = 1.0 - b2**self.step_count
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def clip_grad_norm(params: Mapping[str, Tensor], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most `max_norm`."""
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = math.sqrt(total)
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= scale
    return norm
