"""
Reverse-mode differentiation over a dynamically recorded graph.

A Tensor wraps a float64 numpy array. Every operation on tensors that need
gradients records its parents and a closure mapping the output gradient to
the parents' gradients; `backward` walks the graph in reverse topological
order. Gradients live in a per-call map, never on the nodes, so independent
samples can be differentiated concurrently.
"""

from __future__ import annotations

from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import LAYER_NORM_EPS, LOG_PROB_FLOOR
from errors import EmptyInputError, GraphCycleError, ShapeError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
GradFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """Dense float64 array with an optional recorded history."""

    __slots__ = ("data", "parents", "grad_fn", "requires_grad", "name")
    __array_priority__ = 100.0

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
        parents: Tuple["Tensor", ...] = (),
        grad_fn: Optional[GradFn] = None,
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.parents = parents
        self.grad_fn = grad_fn

    # ------------------------------------------------------------------
    # Introspection
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self.grad_fn is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return len(self.data)

    # ------------------------------------------------------------------
    # Operator sugar
    # ------------------------------------------------------------------

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __matmul__(self, other): return matmul(self, other)
    def __rmatmul__(self, other): return matmul(other, self)
    def __neg__(self): return neg(self)
    def __getitem__(self, index): return getitem(self, index)

    @property
    def T(self) -> "Tensor":
        return swap_last(self)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def parameter(data, name: str) -> Tensor:
    """Leaf tensor that receives gradients."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def _record(data: np.ndarray, parents: Tuple[Tensor, ...], grad_fn: GradFn) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, grad_fn=grad_fn)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ----------------------------------------------------------------------
# Elementwise arithmetic
# ----------------------------------------------------------------------

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(a.data + b.data, (a, b), grad_fn)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _record(a.data - b.data, (a, b), grad_fn)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record(a.data * b.data, (a, b), grad_fn)


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )

    return _record(a.data / b.data, (a, b), grad_fn)


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _record(-a.data, (a,), lambda g: (-g,))


# ----------------------------------------------------------------------
# Nonlinearities
# ----------------------------------------------------------------------

def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return _record(np.log(a.data), (a,), lambda g: (g / a.data,))


def tanh(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _record(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    active = a.data > 0
    return _record(np.where(active, a.data, 0.0), (a,), lambda g: (g * active,))


def softplus(a: ArrayLike) -> Tensor:
    """log(1 + exp(a)), stable for large |a|."""
    a = as_tensor(a)
    out = np.logaddexp(0.0, a.data)

    def grad_fn(g):
        return (g * np.exp(a.data - out),)

    return _record(out, (a,), grad_fn)


def clamp_min(a: ArrayLike, floor: float) -> Tensor:
    a = as_tensor(a)
    keep = a.data >= floor
    return _record(np.where(keep, a.data, floor), (a,), lambda g: (g * keep,))


def safe_log(a: ArrayLike, floor: float = LOG_PROB_FLOOR) -> Tensor:
    """log(max(a, floor)); the clamp keeps early-training underflow finite."""
    return log(clamp_min(a, floor))


# ----------------------------------------------------------------------
# Linear algebra and shape
# ----------------------------------------------------------------------

def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """np.matmul semantics, including batch broadcasting and 1-D operands."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeError("matmul", "scalar operands are not supported")
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError("matmul", f"cannot multiply {a.shape} by {b.shape}")
    out = np.matmul(a.data, b.data)

    def grad_fn(g):
        a2 = a.data[np.newaxis, :] if a.ndim == 1 else a.data
        b2 = b.data[:, np.newaxis] if b.ndim == 1 else b.data
        g2 = g
        if a.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if b.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        ga = np.matmul(g2, np.swapaxes(b2, -1, -2))
        gb = np.matmul(np.swapaxes(a2, -1, -2), g2)
        if a.ndim == 1:
            ga = ga.reshape(ga.shape[:-2] + ga.shape[-1:])
            ga = _unbroadcast(ga, a.shape)
        else:
            ga = _unbroadcast(ga, a.shape)
        if b.ndim == 1:
            gb = gb.reshape(gb.shape[:-1])
            gb = _unbroadcast(gb, b.shape)
        else:
            gb = _unbroadcast(gb, b.shape)
        return ga, gb

    return _record(out, (a, b), grad_fn)


def transpose(a: ArrayLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _record(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def swap_last(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    if a.ndim < 2:
        return a
    return _record(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def reshape(a: ArrayLike, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    original = a.shape
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(original),))


def getitem(a: ArrayLike, index) -> Tensor:
    a = as_tensor(a)

    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(p, (int, np.integer, slice)) or p is None or p is Ellipsis for p in parts)

    def grad_fn(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _record(a.data[index], (a,), grad_fn)


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise EmptyInputError("concat needs at least one tensor")
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), grad_fn)


def stack(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise EmptyInputError("stack needs at least one tensor")

    def grad_fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(parts)))

    return _record(np.stack([p.data for p in parts], axis=axis), tuple(parts), grad_fn)


def flip(a: ArrayLike, axis: int = 0) -> Tensor:
    a = as_tensor(a)
    return _record(np.flip(a.data, axis=axis).copy(), (a,), lambda g: (np.flip(g, axis=axis).copy(),))


# ----------------------------------------------------------------------
# Reductions
# ----------------------------------------------------------------------

def tsum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(out, (a,), grad_fn)


def mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / float(count))


# ----------------------------------------------------------------------
# Normalizations
# ----------------------------------------------------------------------

def softmax(x: ArrayLike, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax along `axis` with max-subtraction.

    Positions where `mask` is False get probability exactly zero; every slice
    must keep at least one unmasked position.
    """
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[axis] == 0:
        raise EmptyInputError("softmax over an empty axis")
    logits = x.data if mask is None else np.where(mask, x.data, -np.inf)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _record(out, (x,), grad_fn)


def softmax_rows(x: ArrayLike) -> Tensor:
    """Row-wise softmax of a rank-2 tensor; each row sums to 1."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError("softmax_rows", f"expected rank 2, got shape {x.shape}")
    return softmax(x, axis=-1)


def layer_norm(x: ArrayLike, gain: ArrayLike, bias: ArrayLike, eps: float = LAYER_NORM_EPS) -> Tensor:
    """gain * (x - mean) / sqrt(var + eps) + bias over the last axis (population variance)."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise ShapeError("layer_norm", f"gain {gain.shape} / bias {bias.shape} do not match input {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    out = gain.data * xhat + bias.data

    def grad_fn(g):
        lead = tuple(range(g.ndim - 1))
        g_gain = (g * xhat).sum(axis=lead) if lead else g * xhat
        g_bias = g.sum(axis=lead) if lead else g
        gxhat = g * gain.data
        gx = inv_std * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, g_gain, g_bias

    return _record(out, (x, gain, bias), grad_fn)


# ----------------------------------------------------------------------
# Reverse pass
# ----------------------------------------------------------------------

def _topological_order(root: Tensor) -> List[Tensor]:
    """Parents before children; raises GraphCycleError on a cycle."""
    order: List[Tensor] = []
    state: Dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: List[Tuple[Tensor, Iterable[Tensor]]] = [(root, iter(root.parents))]
    state[id(root)] = 1
    while stack:
        node, children = stack[-1]
        advanced = False
        for parent in children:
            if not parent.requires_grad:
                continue
            mark = state.get(id(parent))
            if mark == 1:
                raise GraphCycleError(f"cycle through {parent!r}")
            if mark is None:
                state[id(parent)] = 1
                stack.append((parent, iter(parent.parents)))
                advanced = True
                break
        if not advanced:
            stack.pop()
            state[id(node)] = 2
            order.append(node)
    return order


def backward(loss: Tensor, store=None) -> Dict[Tensor, np.ndarray]:
    """
    Gradients of a scalar `loss` with respect to every leaf that requires grad.

    Args:
        loss: scalar tensor produced by recorded operations
        store: optional ParamStore; its gradient accumulators receive the result

    Returns:
        Map from leaf tensor to gradient array (same shape as the leaf)
    """
    if loss.size != 1:
        raise ShapeError("backward", f"loss must be a scalar, got shape {loss.shape}")
    leaves: Dict[Tensor, np.ndarray] = {}
    if not loss.requires_grad:
        return leaves

    order = _topological_order(loss)
    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            leaves[node] = leaves[node] + g if node in leaves else g
            continue
        for parent, pg in zip(node.parents, node.grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg

    if store is not None:
        store.accumulate(leaves)
    return leaves
