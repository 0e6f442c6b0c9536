"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

Every op builds a new :class:`Tensor` that records its parents and a closure
mapping the output gradient to parent gradients. ``backward`` walks the
graph in reverse creation order, which is always a valid topological order
because a node can only be created after its parents.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Iterable, Mapping

import numpy as np

_ids = itertools.count()

OP_KINDS = (
    "matmul", "affine", "add", "sub", "mul", "div", "neg", "exp", "log",
    "tanh", "relu", "square", "softplus", "sum", "mean", "logsumexp",
    "softmax", "max", "concat", "slice", "stop_gradient",
)


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    """A node in a differentiation graph.

    ``data`` is never mutated after construction. ``grad`` is only filled on
    leaves (nodes without parents) that have ``requires_grad`` set.
    """

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_backward", "_id")
    # make numpy defer to the reflected operators (ndarray - Tensor -> Tensor)
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, op: str | None = None,
                 parents: tuple = (), backward_fn: Callable | None = None):
        arr = np.array(data, dtype=np.float64)
        arr.flags.writeable = False
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.op = op
        self.parents = parents
        self._backward = backward_fn
        self._id = next(_ids)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f", op={self.op}" if self.op else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def backward(self):
        backward(self)

    # operator sugar
    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, other): return matmul(self, other)
    def __getitem__(self, idx): return slice_(self, idx)

    def sum(self, axis=None, keepdims=False): return sum_(self, axis, keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis, keepdims)
    def exp(self): return exp(self)
    def log(self): return log(self)
    def tanh(self): return tanh(self)
    def relu(self): return relu(self)
    def square(self): return square(self)
    def softplus(self): return softplus(self)
    def max(self, axis=None, keepdims=False): return max_(self, axis, keepdims)
    def logsumexp(self, axis=None, keepdims=False): return logsumexp(self, axis, keepdims)
    def softmax(self, axis=-1): return softmax(self, axis)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, op, parents, backward_fn) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, op=op, parents=parents, backward_fn=backward_fn)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(kind: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- binary ops

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return _make(a.data + b.data, "add", (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return _make(a.data - b.data, "sub", (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return _make(a.data * b.data, "mul", (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    out = a.data / b.data

    def bw(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * out / b.data, b.shape))
    return _make(out, "div", (a, b), bw)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _make(a.data @ b.data, "matmul", (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g))


def affine(x, w, b) -> Tensor:
    """``x @ w + b`` with the bias broadcast over rows."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"affine: incompatible shapes x={x.shape} w={w.shape} b={b.shape}")
    return _make(x.data @ w.data + b.data, "affine", (x, w, b),
                 lambda g: (g @ w.data.T, x.data.T @ g, g.sum(axis=0)))


# ----------------------------------------------------------------- unary ops

def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, "neg", (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _make(out, "exp", (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return _make(out, "log", (a,), lambda g: (g / a.data,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, "tanh", (a,), lambda g: (g * (1.0 - out * out),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(np.where(mask, a.data, 0.0), "relu", (a,), lambda g: (g * mask,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _make(a.data * a.data, "square", (a,), lambda g: (2.0 * a.data * g,))


def softplus(a) -> Tensor:
    """``log(1 + exp(a))``, computed without overflow."""
    a = as_tensor(a)
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    # sigmoid via tanh stays finite for any input
    sig = 0.5 * (1.0 + np.tanh(0.5 * x))
    return _make(out, "softplus", (a,), lambda g: (g * sig,))


def stop_gradient(a) -> Tensor:
    """Copy of ``a`` that blocks all gradient flow."""
    a = as_tensor(a)
    return Tensor(a.data, requires_grad=False, op="stop_gradient", parents=(a,),
                  backward_fn=lambda g: (np.zeros_like(a.data),))


# ---------------------------------------------------------------- reductions

def _check_axis(kind, a, axis):
    if axis is None:
        return
    axes = axis if isinstance(axis, tuple) else (axis,)
    for ax in axes:
        if not -a.ndim <= ax < a.ndim:
            raise ShapeError(f"{kind}: axis {axis} out of range for shape {a.shape}")


def _expand(g, shape, axis, keepdims):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    _check_axis("sum", a, axis)
    return _make(a.data.sum(axis=axis, keepdims=keepdims), "sum", (a,),
                 lambda g: (np.array(_expand(g, a.shape, axis, keepdims)),))


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    _check_axis("mean", a, axis)
    if a.data.size == 0:
        raise ShapeError("mean: empty input")
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / max(np.size(out), 1)
    return _make(out, "mean", (a,),
                 lambda g: (np.array(_expand(g, a.shape, axis, keepdims)) / count,))


def logsumexp(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    _check_axis("logsumexp", a, axis)
    x = a.data
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True)
    out = np.log(s) + m
    soft = e / s
    if not keepdims:
        out = np.squeeze(out, axis=axis) if axis is not None else out.reshape(())
    return _make(out, "logsumexp", (a,),
                 lambda g: (_expand(g, a.shape, axis, keepdims) * soft,))


def softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    _check_axis("softmax", a, axis)
    x = a.data
    e = np.exp(x - np.max(x, axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)
    return _make(out, "softmax", (a,),
                 lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def max_(a, axis=None, keepdims=False) -> Tensor:
    """Maximum; the gradient goes to the first maximal entry only."""
    a = as_tensor(a)
    _check_axis("max", a, axis)
    x = a.data
    out = x.max(axis=axis, keepdims=keepdims)

    def bw(g):
        grad = np.zeros_like(x)
        if axis is None:
            grad.flat[np.argmax(x)] = g
            return (grad,)
        idx = np.expand_dims(np.argmax(x, axis=axis), axis)
        gk = g if keepdims else np.expand_dims(g, axis)
        np.put_along_axis(grad, idx, gk, axis=axis)
        return (grad,)
    return _make(out, "max", (a,), bw)


# --------------------------------------------------------- structural ops

def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat: no inputs")
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in ts]} on axis {axis}") from exc
    splits = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _make(out, "concat", tuple(ts), lambda g: tuple(np.split(g, splits, axis=axis)))


def slice_(a, idx) -> Tensor:
    """Basic or integer-array indexing; repeated indices accumulate gradient."""
    a = as_tensor(a)
    try:
        out = a.data[idx]
    except IndexError as exc:
        raise ShapeError(f"slice: index {idx!r} invalid for shape {a.shape}") from exc

    def bw(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, idx, g)
        return (grad,)
    return _make(out, "slice", (a,), bw)


def log_softmax(a, axis=-1) -> Tensor:
    a = as_tensor(a)
    return a - logsumexp(a, axis=axis, keepdims=True)


# ----------------------------------------------------------------- backward

def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every reachable leaf."""
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    nodes = {}
    stack = [loss]
    while stack:
        node = stack.pop()
        if node._id in nodes or not node.requires_grad:
            continue
        nodes[node._id] = node
        stack.extend(node.parents)
    grads = {loss._id: np.ones_like(loss.data)}
    for nid in sorted(nodes, reverse=True):
        node = nodes[nid]
        g = grads.pop(nid, None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = np.array(g) if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node.parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=np.float64).reshape(parent.shape)
            if parent._id in grads:
                grads[parent._id] = grads[parent._id] + pg
            else:
                grads[parent._id] = pg


# ----------------------------------------------------------- parameter store

class ParameterStore:
    """Named, shaped slices of one flat float64 vector.

    Slices are laid out in insertion order, are disjoint and cover the whole
    vector, so ``unflatten(flatten(x)) == x`` exactly.
    """

    def __init__(self, shapes: Mapping[str, tuple], flat: np.ndarray | None = None):
        self.slices: dict[str, tuple[int, tuple]] = {}
        offset = 0
        for name, shape in shapes.items():
            shape = tuple(int(s) for s in shape)
            self.slices[name] = (offset, shape)
            offset += math.prod(shape)
        self.size = offset
        if flat is None:
            flat = np.zeros(offset)
        flat = np.array(flat, dtype=np.float64)
        if flat.shape != (offset,):
            raise ShapeError(f"ParameterStore: flat vector has shape {flat.shape}, expected ({offset},)")
        self.flat = flat

    @property
    def names(self) -> list[str]:
        return list(self.slices)

    @property
    def shapes(self) -> dict[str, tuple]:
        return {k: s for k, (_, s) in self.slices.items()}

    def __getitem__(self, name: str) -> np.ndarray:
        off, shape = self.slices[name]
        return self.flat[off:off + math.prod(shape)].reshape(shape)

    def __setitem__(self, name: str, value) -> None:
        off, shape = self.slices[name]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != shape:
            raise ShapeError(f"ParameterStore: {name} expects {shape}, got {value.shape}")
        self.flat[off:off + math.prod(shape)] = value.ravel()

    def __contains__(self, name: str) -> bool:
        return name in self.slices

    def copy(self) -> "ParameterStore":
        return ParameterStore(self.shapes, self.flat.copy())

    def unflatten(self, flat: np.ndarray | None = None) -> dict[str, np.ndarray]:
        flat = self.flat if flat is None else flat
        return {name: flat[off:off + math.prod(shape)].reshape(shape).copy()
                for name, (off, shape) in self.slices.items()}

    def flatten(self, arrays: Mapping[str, np.ndarray]) -> np.ndarray:
        out = np.zeros(self.size)
        for name, (off, shape) in self.slices.items():
            out[off:off + math.prod(shape)] = np.asarray(arrays[name], dtype=np.float64).reshape(-1)
        return out

    def leaves(self, flat: np.ndarray | None = None) -> dict[str, Tensor]:
        """Fresh leaf tensors (requires_grad) holding copies of each slice."""
        return {k: Tensor(v, requires_grad=True) for k, v in self.unflatten(flat).items()}

    def grad_vector(self, leaves: Mapping[str, Tensor]) -> np.ndarray:
        return self.flatten({k: (t.grad if t.grad is not None else np.zeros(t.shape))
                             for k, t in leaves.items()})

    def name_of(self, index: int) -> str:
        for name, (off, shape) in self.slices.items():
            if off <= index < off + math.prod(shape):
                return name
        raise IndexError(index)


def value_and_grad(fn: Callable[[dict], Tensor], store: ParameterStore,
                   flat: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    leaves = store.leaves(flat)
    loss = fn(leaves)
    backward(loss)
    return float(loss.data), store.grad_vector(leaves)


def grad_check(fn: Callable[[dict], Tensor], point: ParameterStore, step: float = 1e-6) -> float:
    """Max over coordinates of |analytic - central difference| / max(1, |analytic|).

    ``fn`` maps a dict of leaf tensors (keyed like ``point``) to a scalar.
    """
    if step <= 0:
        raise ValueError("grad_check: step must be positive")
    value, analytic = value_and_grad(fn, point)
    if not np.isfinite(value):
        raise NonFiniteError("grad_check: non-finite function value at the base point")
    bad = np.flatnonzero(~np.isfinite(analytic))
    if bad.size:
        raise NonFiniteError(f"grad_check: non-finite analytic gradient at {point.name_of(bad[0])}[{bad[0]}]")
    worst = 0.0
    for i in range(point.size):
        plus = point.flat.copy()
        plus[i] += step
        minus = point.flat.copy()
        minus[i] -= step
        fp = float(fn(point.leaves(plus)).data)
        fm = float(fn(point.leaves(minus)).data)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteError(f"grad_check: non-finite value perturbing {point.name_of(i)} (flat index {i})")
        numeric = (fp - fm) / (2.0 * step)
        err = abs(analytic[i] - numeric) / max(1.0, abs(analytic[i]))
        worst = max(worst, err)
    return worst
