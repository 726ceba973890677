"""Dense float64 tensors with reverse-mode automatic differentiation.

Storage and elementwise arithmetic are delegated to numpy; the tape, the
backward rules, and every gradient in this package are defined here.  All
tensors are double precision.  Any op producing a non-finite value raises
NumericError instead of letting NaN/inf propagate.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "TensorError",
    "ShapeError",
    "NumericError",
    "no_grad",
    "backward",
    "stop_gradient",
    "add",
    "sub",
    "mul",
    "div",
    "matmul",
    "exp",
    "log",
    "sqrt",
    "tanh",
    "sigmoid",
    "sin",
    "cos",
    "relu",
    "silu",
    "tsum",
    "tmean",
    "tmax",
    "logsumexp",
    "softmax",
    "l2norm",
    "normalize",
    "concat",
    "reshape",
    "transpose",
    "broadcast_to",
    "take_rows",
    "cross_entropy",
    "as_tensor",
]


class TensorError(Exception):
    """Base class for tensor library failures."""


class ShapeError(TensorError):
    """Operand shapes do not conform for the requested op."""


class NumericError(TensorError):
    """An op produced a non-finite value (overflow, 0/0, log of <= 0)."""


class _GradMode(threading.local):
    def __init__(self):
        self.enabled = True


_MODE = _GradMode()


class no_grad:
    """Context manager disabling graph construction (pure forward eval)."""

    def __enter__(self):
        self._prev = _MODE.enabled
        _MODE.enabled = False
        return self

    def __exit__(self, *exc):
        _MODE.enabled = self._prev
        return False


class Tape(threading.local):
    """Execution-ordered record of graph nodes.

    Nodes are appended as ops execute, so the list is topologically ordered
    by construction: every parent precedes its children.  The tape exists
    for introspection and invariant checks; backward() walks parent links
    directly and visits each reachable node exactly once.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []

    def clear(self):
        self.nodes.clear()

    def __len__(self):
        return len(self.nodes)


_TAPE = Tape()


def active_tape() -> Tape:
    return _TAPE


class Tensor:
    """A dense float64 array plus optional gradient bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_bwd")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor initialized with non-finite values")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._bwd: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def accumulate(self, g: np.ndarray):
        if self.grad is None:
            # copy: g may be a broadcast view or a buffer shared with the op
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar; every rule lives in the module-level functions below
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return pow_const(self, p)

    def __getitem__(self, idx):
        return tslice(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)

    @property
    def T(self):
        return transpose(self, None)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(arr: np.ndarray, opname: str):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite output of op '{opname}'")


def _node(data: np.ndarray, opname: str, parents: Sequence[Tensor],
          bwd: Callable[[np.ndarray], None]) -> Tensor:
    """Wrap an op result; wire it into the graph when grads are wanted."""
    _check_finite(data, opname)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    tracked = _MODE.enabled and any(p.requires_grad for p in parents)
    out.requires_grad = tracked
    if tracked:
        out._parents = tuple(parents)
        out._bwd = bwd
        _TAPE.nodes.append(out)
    else:
        out._parents = ()
        out._bwd = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum out axes that numpy broadcasting introduced or stretched."""
    if grad.shape == shape:
        return grad
    nd_extra = grad.ndim - len(shape)
    if nd_extra > 0:
        grad = grad.sum(axis=tuple(range(nd_extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise / arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.shape))

    return _node(data, "add", (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.shape))

    return _node(data, "sub", (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.shape))

    return _node(data, "mul", (a, b), bwd)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _node(data, "div", (a, b), bwd)


def pow_const(a, p: float) -> Tensor:
    a = as_tensor(a)
    p = float(p)
    data = a.data ** p

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * p * a.data ** (p - 1.0))

    return _node(data, "pow", (a,), bwd)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data @ b.data
    except ValueError as e:
        raise ShapeError(f"matmul shapes {a.shape} x {b.shape}: {e}") from None

    def bwd(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:
            if a.requires_grad:
                a.accumulate(g * bd)
            if b.requires_grad:
                b.accumulate(g * ad)
            return
        ga = gb = None
        if ad.ndim == 1:  # (k,) @ (..., k, n)
            if a.requires_grad:
                ga = (np.expand_dims(g, -2) @ np.swapaxes(bd, -1, -2)).reshape(bd.shape[:-2] + ad.shape)
                ga = _unbroadcast(ga, ad.shape)
            if b.requires_grad:
                gb = np.expand_dims(ad, -1) @ np.expand_dims(g, -2)
                gb = _unbroadcast(gb, bd.shape)
        elif bd.ndim == 1:  # (..., m, k) @ (k,)
            if a.requires_grad:
                ga = np.expand_dims(g, -1) @ np.expand_dims(bd, -2)
                ga = _unbroadcast(ga, ad.shape)
            if b.requires_grad:
                gb = (np.swapaxes(ad, -1, -2) @ np.expand_dims(g, -1)).reshape(ad.shape[:-2] + bd.shape)
                gb = _unbroadcast(gb, bd.shape)
        else:
            if a.requires_grad:
                ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape)
            if b.requires_grad:
                gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape)
        if ga is not None:
            a.accumulate(ga)
        if gb is not None:
            b.accumulate(gb)

    return _node(data, "matmul", (a, b), bwd)


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * data)

    return _node(data, "exp", (a,), bwd)


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0.0):
        raise NumericError("log of non-positive value")
    data = np.log(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g / a.data)

    return _node(data, "log", (a,), bwd)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data < 0.0):
        raise NumericError("sqrt of negative value")
    data = np.sqrt(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * 0.5 / np.maximum(data, 1e-300))

    return _node(data, "sqrt", (a,), bwd)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * (1.0 - data * data))

    return _node(data, "tanh", (a,), bwd)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * data * (1.0 - data))

    return _node(data, "sigmoid", (a,), bwd)


def sin(a) -> Tensor:
    a = as_tensor(a)
    data = np.sin(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * np.cos(a.data))

    return _node(data, "sin", (a,), bwd)


def cos(a) -> Tensor:
    a = as_tensor(a)
    data = np.cos(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(-g * np.sin(a.data))

    return _node(data, "cos", (a,), bwd)


def relu(a) -> Tensor:
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * (a.data > 0.0))

    return _node(data, "relu", (a,), bwd)


def silu(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    e = np.exp(-np.abs(x))
    s = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    data = x * s

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g * (s + x * s * (1.0 - s)))

    return _node(data, "silu", (a,), bwd)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------

def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if not a.requires_grad:
            return
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate(np.broadcast_to(g, a.shape))

    return _node(np.asarray(data), "sum", (a,), bwd)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        n = a.size
    elif isinstance(axis, int):
        n = a.data.shape[axis]
    else:
        n = int(np.prod([a.data.shape[i] for i in axis]))

    def bwd(g):
        if not a.requires_grad:
            return
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate(np.broadcast_to(g, a.shape) / n)

    return _node(np.asarray(data), "mean", (a,), bwd)


def tmax(a, axis: int, keepdims=False) -> Tensor:
    """Max-reduce along one axis; ties route the gradient to the lowest index."""
    a = as_tensor(a)
    data = a.data.max(axis=axis, keepdims=keepdims)
    amax = np.argmax(a.data, axis=axis)  # argmax picks the first (lowest) index on ties

    def bwd(g):
        if not a.requires_grad:
            return
        gflat = np.squeeze(g, axis=axis) if keepdims else g
        out = np.zeros_like(a.data)
        ax = axis if axis >= 0 else a.data.ndim + axis
        idx = list(np.indices(amax.shape))
        idx.insert(ax, amax)
        np.add.at(out, tuple(idx), gflat)
        a.accumulate(out)

    return _node(np.asarray(data), "max", (a,), bwd)


def logsumexp(a, axis: int = -1, keepdims=False) -> Tensor:
    """Shift-stable log-sum-exp; the only sanctioned route to softmax."""
    a = as_tensor(a)
    m = a.data.max(axis=axis, keepdims=True)
    shifted = a.data - m
    sumexp = np.exp(shifted).sum(axis=axis, keepdims=True)
    out = m + np.log(sumexp)
    soft = np.exp(shifted) / sumexp  # cached softmax for the backward rule
    data = out if keepdims else np.squeeze(out, axis=axis)

    def bwd(g):
        if not a.requires_grad:
            return
        gg = g if keepdims else np.expand_dims(g, axis)
        a.accumulate(gg * soft)

    return _node(np.asarray(data), "logsumexp", (a,), bwd)


def softmax(a, axis: int = -1) -> Tensor:
    """softmax(x) = exp(x - logsumexp(x)); raw exponentiation of logits is
    deliberately not offered."""
    return exp(sub(a, logsumexp(a, axis=axis, keepdims=True)))


def l2norm(a, axis: int = -1, keepdims=False) -> Tensor:
    a = as_tensor(a)
    sq = np.sum(a.data * a.data, axis=axis, keepdims=True)
    if np.any(sq == 0.0):
        raise NumericError("zero-norm vector")
    nrm = np.sqrt(sq)
    data = nrm if keepdims else np.squeeze(nrm, axis=axis)

    def bwd(g):
        if not a.requires_grad:
            return
        gg = g if keepdims else np.expand_dims(g, axis)
        a.accumulate(gg * a.data / nrm)

    return _node(np.asarray(data), "l2norm", (a,), bwd)


def normalize(a, axis: int = -1) -> Tensor:
    return div(a, l2norm(a, axis=axis, keepdims=True))


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from None
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t.accumulate(g[tuple(sl)])

    return _node(data, "concat", ts, bwd)


def tslice(a, idx) -> Tensor:
    a = as_tensor(a)
    data = a.data[idx]

    def bwd(g):
        if a.requires_grad:
            out = np.zeros_like(a.data)
            np.add.at(out, idx, g)
            a.accumulate(out)

    return _node(np.asarray(data), "slice", (a,), bwd)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape {a.shape} -> {shape}: {e}") from None

    def bwd(g):
        if a.requires_grad:
            a.accumulate(g.reshape(a.shape))

    return _node(data, "reshape", (a,), bwd)


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    data = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def bwd(g):
        if a.requires_grad:
            a.accumulate(np.transpose(g, inv))

    return _node(data, "transpose", (a,), bwd)


def broadcast_to(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        data = np.broadcast_to(a.data, shape).copy()
    except ValueError as e:
        raise ShapeError(f"broadcast {a.shape} -> {shape}: {e}") from None

    def bwd(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))

    return _node(data, "broadcast", (a,), bwd)


def take_rows(table, indices) -> Tensor:
    """Row lookup (embedding gather) along axis 0."""
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.intp)
    data = table.data[idx]

    def bwd(g):
        if table.requires_grad:
            out = np.zeros_like(table.data)
            np.add.at(out, idx, g)
            table.accumulate(out)

    return _node(data, "take_rows", (table,), bwd)


def cross_entropy(logits, targets) -> Tensor:
    """Mean negative log-likelihood of integer class targets.

    logits: (N, K); targets: length-N integer array.
    """
    logits = as_tensor(logits)
    t = np.asarray(targets, dtype=np.intp)
    if logits.ndim != 2 or t.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape}, targets {t.shape}")
    lse = logsumexp(logits, axis=1, keepdims=False)
    picked = tslice(logits, (np.arange(len(t)), t))
    return tmean(sub(lse, picked))


# ---------------------------------------------------------------------------
# gradient flow control and backward
# ---------------------------------------------------------------------------

def stop_gradient(a) -> Tensor:
    """Identity in value; contributes zero gradient to ancestors of `a`."""
    a = as_tensor(a)
    return Tensor(a.data.copy())


def backward(root: Tensor):
    """Reverse-accumulate d(root)/d(leaf) into every requires_grad leaf.

    Repeated calls accumulate; zero grads between calls if that is not
    wanted.  Root must be scalar.
    """
    if root.size != 1:
        raise ShapeError(f"backward root must be scalar, got shape {root.shape}")
    if not root.requires_grad:
        return
    # iterative topological order over the reachable subgraph
    order: list[Tensor] = []
    seen = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    root.accumulate(np.ones_like(root.data))
    for node in reversed(order):
        if node._bwd is not None and node.grad is not None:
            node._bwd(node.grad)


def zero_grads(tensors: Iterable[Tensor]):
    for t in tensors:
        t.grad = None
