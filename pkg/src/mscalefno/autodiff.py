"""Define-by-run reverse-mode differentiation over dense float64/complex128 arrays.

Every op returns a new :class:`Tensor`; when at least one input requires a
gradient the result records its parents and a vector-Jacobian closure.
Complex tensors use the real-view convention: the gradient stored for a
complex array ``z = x + iy`` is ``dL/dx + i dL/dy``.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import ndtr

_GRAD_ENABLED = True

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class ShapeError(ValueError):
    pass


@contextlib.contextmanager
def no_grad():
    """Evaluate without recording a graph (evaluation mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value)
    dtype = np.complex128 if np.iscomplexobj(arr) else np.float64
    arr = np.asarray(arr, dtype=dtype)
    return arr if arr.flags.c_contiguous else arr.copy()


class Tensor:
    """A dense array that may participate in a differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @classmethod
    def from_op(cls, data, parents: Sequence["Tensor"], backward: Callable, op: str) -> "Tensor":
        """Wrap ``data`` as the output of ``op``.

        ``backward(g)`` must return one gradient (or None) per parent, each
        shaped like that parent's data.
        """
        out = cls(data)
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out.op = op
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.op = op
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_complex(self) -> bool:
        return self.data.dtype == np.complex128

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return self.data.item()

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flag}, op={self.op})"

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, _lift(other))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(_lift(other), self)

    def __neg__(self):
        return scale(self, -1.0)

    def __getitem__(self, index: int):
        return take(self, index)


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _fit(grad: np.ndarray, like: Tensor) -> np.ndarray:
    """Reduce a broadcast gradient back onto ``like``'s shape and dtype."""
    if like.shape == () and grad.shape != ():
        grad = grad.sum()
    if not like.is_complex and np.iscomplexobj(grad):
        grad = grad.real
    return np.asarray(grad, dtype=like.data.dtype).reshape(like.shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    return Tensor.from_op(a.data + b.data, (a, b), lambda g: (_fit(g, a), _fit(g, b)), "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    return Tensor.from_op(a.data - b.data, (a, b), lambda g: (_fit(g, a), _fit(-g, b)), "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")

    def backward(g):
        return _fit(g * np.conj(b.data), a), _fit(g * np.conj(a.data), b)

    return Tensor.from_op(a.data * b.data, (a, b), backward, "mul")


def scale(a: Tensor, factor: float) -> Tensor:
    return Tensor.from_op(a.data * factor, (a,), lambda g: (g * factor,), "scale")


def sin(a: Tensor) -> Tensor:
    if a.is_complex:
        raise TypeError("sin: real input required")
    return Tensor.from_op(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),), "sin")


def gelu(a: Tensor) -> Tensor:
    """Exact GELU, ``x * Phi(x)`` with ``Phi(x) = (1 + erf(x / sqrt 2)) / 2``."""
    if a.is_complex:
        raise TypeError("gelu: real input required")
    x = a.data
    cdf = ndtr(x)

    def backward(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
        return (g * (cdf + x * pdf),)

    return Tensor.from_op(x * cdf, (a,), backward, "gelu")


def matmul(x: Tensor, w: Tensor) -> Tensor:
    """``x[..., d_in] @ w[d_in, d_out]`` applied along the last axis of x."""
    if w.ndim != 2 or x.ndim < 1 or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {x.shape} and {w.shape}")

    def backward(g):
        gx = g @ w.data.T if x.requires_grad else None
        gw = None
        if w.requires_grad:
            gw = x.data.reshape(-1, w.shape[0]).T @ g.reshape(-1, w.shape[1])
        return gx, gw

    return Tensor.from_op(x.data @ w.data, (x, w), backward, "matmul")


def affine(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Pointwise affine map ``y[..., j, :] = x[..., j, :] @ w + b``."""
    if w.ndim != 2 or x.ndim < 1 or x.shape[-1] != w.shape[0]:
        raise ShapeError(f"affine: incompatible shapes {x.shape} and {w.shape}")
    if b is not None and b.shape != (w.shape[1],):
        raise ShapeError(f"affine: bias shape {b.shape} does not match weight {w.shape}")
    if b is None:
        return matmul(x, w)
    y = x.data @ w.data
    y += b.data

    def backward(g):
        g2 = g.reshape(-1, w.shape[1])
        gx = g @ w.data.T if x.requires_grad else None
        gw = x.data.reshape(-1, w.shape[0]).T @ g2 if w.requires_grad else None
        gb = g2.sum(axis=0) if b.requires_grad else None
        return gx, gw, gb

    return Tensor.from_op(y, (x, w, b), backward, "affine")


def take(a: Tensor, index: int) -> Tensor:
    """Select ``a[index]`` along the first axis."""

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return Tensor.from_op(a.data[index].copy(), (a,), backward, "take")


def total(a: Tensor) -> Tensor:
    """Sum of all entries, as a 0-d tensor."""
    return Tensor.from_op(a.data.sum(), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),), "sum")


def mean(a: Tensor) -> Tensor:
    n = a.size
    return Tensor.from_op(a.data.mean(), (a,), lambda g: (np.full(a.shape, g / n),), "mean")


def square(a: Tensor) -> Tensor:
    if a.is_complex:
        raise TypeError("square: real input required")
    return Tensor.from_op(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def relative_l2_loss(pred: Tensor, target) -> Tensor:
    """Mean over the leading (sample) axis of ``||pred - target|| / ||target||``.

    A 2-D ``pred`` of shape ``[n, d_u]`` is treated as a single sample.
    """
    t = np.asarray(target, dtype=np.float64)
    if pred.shape != t.shape:
        raise ShapeError(f"relative_l2: incompatible shapes {pred.shape} and {t.shape}")
    p = pred.data if pred.ndim > 2 else pred.data[None]
    tt = t if t.ndim > 2 else t[None]
    axes = tuple(range(1, p.ndim))
    diff = p - tt
    tnorm = np.sqrt(np.sum(tt * tt, axis=axes))
    if np.any(tnorm == 0.0):
        raise ValueError("relative_l2: target with zero norm")
    dnorm = np.sqrt(np.sum(diff * diff, axis=axes))
    batch = p.shape[0]
    value = np.mean(dnorm / tnorm)

    def backward(g):
        safe = np.where(dnorm > 0.0, dnorm, 1.0)
        coef = np.where(dnorm > 0.0, 1.0 / (safe * tnorm * batch), 0.0)
        coef = coef.reshape((batch,) + (1,) * (p.ndim - 1))
        return ((g * coef * diff).reshape(pred.shape),)

    return Tensor.from_op(value, (pred,), backward, "relative_l2")


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
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
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate ``d loss / d leaf`` into ``leaf.grad`` for every reachable leaf."""
    if loss.size != 1 or loss.is_complex:
        raise ShapeError(f"backward: loss must be a real scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape)}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


def gradients(loss: Tensor, leaves: Iterable[Tensor]) -> list[np.ndarray]:
    """Clear ``leaves``' grads, run :func:`backward`, and return one array per leaf.

    Leaves the loss does not depend on get zeros.
    """
    leaves = list(leaves)
    for leaf in leaves:
        leaf.grad = None
    backward(loss)
    return [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data) for leaf in leaves]
