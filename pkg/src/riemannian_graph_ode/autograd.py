"""
Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps a float64 ndarray and records the operation that produced
it. Calling ``backward()`` on a scalar result walks the recorded graph in
reverse topological order and accumulates ``grad`` on every tensor created
with ``requires_grad=True``.

The module-level helpers (``tanh``, ``norm``, ``where``, ...) dispatch on their
argument: plain arrays go straight to numpy, Tensors build graph nodes. The
geometry, curvature and network code is written once against these helpers and
runs unchanged in both modes.
"""

from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np


class Tensor:
    """An ndarray that remembers how it was computed."""

    # make numpy defer mixed ndarray/Tensor arithmetic to Tensor's reflected ops
    __array_priority__ = 1000
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, _children: Tuple["Tensor", ...] = (), _op: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._backward: Callable[[], None] = lambda: None
        self._prev = _children
        self._op = _op

    # ------------------------------------------------------------------ graph

    @staticmethod
    def _result(data, children: Sequence["Tensor"], op: str) -> "Tensor":
        tracked = tuple(c for c in children if c.requires_grad)
        return Tensor(data, requires_grad=bool(tracked), _children=tracked, _op=op)

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = _unbroadcast(grad, self.data.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + grad

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf's ``grad``."""
        topo: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in node._prev:
                if id(child) not in visited:
                    stack.append((child, False))

        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)
        for node in reversed(topo):
            node._backward()

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    # ------------------------------------------------------------- properties

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    # ------------------------------------------------------------- arithmetic

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor._result(self.data + other.data, (self, other), "+")

        def _backward():
            self._accumulate(out.grad)
            other._accumulate(out.grad)
        out._backward = _backward
        return out

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor._result(self.data * other.data, (self, other), "*")

        def _backward():
            self._accumulate(out.grad * other.data)
            other._accumulate(out.grad * self.data)
        out._backward = _backward
        return out

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor._result(self.data / other.data, (self, other), "/")

        def _backward():
            self._accumulate(out.grad / other.data)
            other._accumulate(-out.grad * self.data / (other.data * other.data))
        out._backward = _backward
        return out

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise TypeError("only constant exponents are supported")
        out = Tensor._result(self.data ** exponent, (self,), f"**{exponent}")

        def _backward():
            self._accumulate(out.grad * exponent * self.data ** (exponent - 1))
        out._backward = _backward
        return out

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __radd__(self, other) -> "Tensor":
        return self + other

    def __sub__(self, other) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) + (-self)

    def __rmul__(self, other) -> "Tensor":
        return self * other

    def __rtruediv__(self, other) -> "Tensor":
        return as_tensor(other) / self

    def __matmul__(self, other) -> "Tensor":
        other = as_tensor(other)
        if self.ndim == 1:
            return (self.reshape(1, -1) @ other).reshape(other.shape[:-2] + other.shape[-1:])
        if other.ndim == 1:
            return (self @ other.reshape(-1, 1)).reshape(self.shape[:-1])
        out = Tensor._result(np.matmul(self.data, other.data), (self, other), "@")

        def _backward():
            g = out.grad
            self._accumulate(np.matmul(g, np.swapaxes(other.data, -1, -2)))
            other._accumulate(np.matmul(np.swapaxes(self.data, -1, -2), g))
        out._backward = _backward
        return out

    def __rmatmul__(self, other) -> "Tensor":
        return as_tensor(other) @ self

    # ---------------------------------------------------------- elementwise

    def _unary(self, value: np.ndarray, derivative: Callable[[np.ndarray], np.ndarray], op: str) -> "Tensor":
        out = Tensor._result(value, (self,), op)

        def _backward():
            self._accumulate(out.grad * derivative(out.data))
        out._backward = _backward
        return out

    def tanh(self) -> "Tensor":
        return self._unary(np.tanh(self.data), lambda y: 1.0 - y * y, "tanh")

    def sigmoid(self) -> "Tensor":
        return self._unary(_np_sigmoid(self.data), lambda y: y * (1.0 - y), "sigmoid")

    def exp(self) -> "Tensor":
        return self._unary(np.exp(self.data), lambda y: y, "exp")

    def tan(self) -> "Tensor":
        return self._unary(np.tan(self.data), lambda y: 1.0 + y * y, "tan")

    def sqrt(self) -> "Tensor":
        return self._unary(np.sqrt(self.data), lambda y: 0.5 / y, "sqrt")

    def sin(self) -> "Tensor":
        x = self.data
        return self._unary(np.sin(x), lambda _: np.cos(x), "sin")

    def cos(self) -> "Tensor":
        x = self.data
        return self._unary(np.cos(x), lambda _: -np.sin(x), "cos")

    def log(self) -> "Tensor":
        x = self.data
        return self._unary(np.log(x), lambda _: 1.0 / x, "log")

    def arctan(self) -> "Tensor":
        x = self.data
        return self._unary(np.arctan(x), lambda _: 1.0 / (1.0 + x * x), "atan")

    def arctanh(self) -> "Tensor":
        x = self.data
        return self._unary(np.arctanh(x), lambda _: 1.0 / (1.0 - x * x), "atanh")

    def clip(self, lower: Optional[float] = None, upper: Optional[float] = None) -> "Tensor":
        x = self.data
        inside = np.ones_like(x, dtype=bool)
        if lower is not None:
            inside &= x >= lower
        if upper is not None:
            inside &= x <= upper
        return self._unary(np.clip(x, lower, upper), lambda _: inside.astype(np.float64), "clip")

    # ----------------------------------------------------------- reductions

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor._result(self.data.sum(axis=axis, keepdims=keepdims), (self,), "sum")

        def _backward():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape))
        out._backward = _backward
        return out

    def norm(self, axis: int = -1, keepdims: bool = True) -> "Tensor":
        """Euclidean norm; the subgradient at the zero vector is taken as zero."""
        n = np.sqrt((self.data * self.data).sum(axis=axis, keepdims=True))
        value = n if keepdims else np.squeeze(n, axis=axis)
        out = Tensor._result(value, (self,), "norm")

        def _backward():
            g = out.grad if keepdims else np.expand_dims(out.grad, axis)
            safe = np.where(n > 0.0, n, 1.0)
            self._accumulate(np.where(n > 0.0, g * self.data / safe, 0.0))
        out._backward = _backward
        return out

    # -------------------------------------------------------------- shaping

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor._result(self.data.reshape(shape), (self,), "reshape")

        def _backward():
            self._accumulate(out.grad.reshape(self.data.shape))
        out._backward = _backward
        return out

    def transpose(self, *axes) -> "Tensor":
        axes = axes or tuple(reversed(range(self.ndim)))
        out = Tensor._result(self.data.transpose(axes), (self,), "transpose")
        inverse = np.argsort(axes)

        def _backward():
            self._accumulate(out.grad.transpose(inverse))
        out._backward = _backward
        return out

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def __getitem__(self, index) -> "Tensor":
        out = Tensor._result(self.data[index], (self,), "gather")

        def _backward():
            full = np.zeros_like(self.data)
            np.add.at(full, index, out.grad)
            self._accumulate(full)
        out._backward = _backward
        return out


# ---------------------------------------------------------------- helpers

def _np_sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    ex = np.exp(x[~positive])
    out[~positive] = ex / (1.0 + ex)
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    grad = np.asarray(grad, dtype=np.float64)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


Value = Union[Tensor, np.ndarray, float]


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def is_tensor(x) -> bool:
    return isinstance(x, Tensor)


def value(x) -> np.ndarray:
    """The numeric payload of ``x`` (no copy for ndarrays and Tensors)."""
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _any_tensor(*xs) -> bool:
    return any(isinstance(x, Tensor) for x in xs)


def tanh(x):
    return x.tanh() if isinstance(x, Tensor) else np.tanh(value(x))


def sigmoid(x):
    return x.sigmoid() if isinstance(x, Tensor) else _np_sigmoid(np.atleast_1d(value(x))).reshape(np.shape(x))


def exp(x):
    return x.exp() if isinstance(x, Tensor) else np.exp(value(x))


def log(x):
    return x.log() if isinstance(x, Tensor) else np.log(value(x))


def sqrt(x):
    return x.sqrt() if isinstance(x, Tensor) else np.sqrt(value(x))


def sin(x):
    return x.sin() if isinstance(x, Tensor) else np.sin(value(x))


def cos(x):
    return x.cos() if isinstance(x, Tensor) else np.cos(value(x))


def tan(x):
    return x.tan() if isinstance(x, Tensor) else np.tan(value(x))


def arctan(x):
    return x.arctan() if isinstance(x, Tensor) else np.arctan(value(x))


def arctanh(x):
    return x.arctanh() if isinstance(x, Tensor) else np.arctanh(value(x))


def clip(x, lower: Optional[float] = None, upper: Optional[float] = None):
    return x.clip(lower, upper) if isinstance(x, Tensor) else np.clip(value(x), lower, upper)


def norm(x, axis: int = -1, keepdims: bool = True):
    if isinstance(x, Tensor):
        return x.norm(axis=axis, keepdims=keepdims)
    return np.linalg.norm(value(x), axis=axis, keepdims=keepdims)


def reduce_sum(x, axis=None, keepdims: bool = False):
    if isinstance(x, Tensor):
        return x.sum(axis=axis, keepdims=keepdims)
    return value(x).sum(axis=axis, keepdims=keepdims)


def matmul(a, b):
    if _any_tensor(a, b):
        return as_tensor(a) @ as_tensor(b)
    return np.matmul(value(a), value(b))


def where(condition, a, b):
    condition = np.asarray(condition, dtype=bool)
    if not _any_tensor(a, b):
        return np.where(condition, value(a), value(b))
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor._result(np.where(condition, a.data, b.data), (a, b), "where")

    def _backward():
        a._accumulate(np.where(condition, out.grad, 0.0))
        b._accumulate(np.where(condition, 0.0, out.grad))
    out._backward = _backward
    return out


def concat(xs: Sequence, axis: int = -1):
    if not _any_tensor(*xs):
        return np.concatenate([value(x) for x in xs], axis=axis)
    tensors = [as_tensor(x) for x in xs]
    out = Tensor._result(np.concatenate([t.data for t in tensors], axis=axis), tensors, "concat")
    splits = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def _backward():
        for t, g in zip(tensors, np.split(out.grad, splits, axis=axis)):
            t._accumulate(g)
    out._backward = _backward
    return out


def stack(xs: Sequence, axis: int = 0):
    if not _any_tensor(*xs):
        return np.stack([value(x) for x in xs], axis=axis)
    tensors = [as_tensor(x) for x in xs]
    out = Tensor._result(np.stack([t.data for t in tensors], axis=axis), tensors, "stack")

    def _backward():
        for k, t in enumerate(tensors):
            t._accumulate(np.take(out.grad, k, axis=axis))
    out._backward = _backward
    return out


def scatter_add(src, index: np.ndarray, size: int):
    """Sum rows of ``src`` into ``size`` buckets selected by ``index``."""
    index = np.asarray(index, dtype=np.int64)
    data = value(src)
    result = np.zeros((size,) + data.shape[1:], dtype=np.float64)
    np.add.at(result, index, data)
    if not isinstance(src, Tensor):
        return result
    out = Tensor._result(result, (src,), "scatter_add")

    def _backward():
        src._accumulate(out.grad[index])
    out._backward = _backward
    return out


def softmax(x, axis: int = -1):
    shift = value(x).max(axis=axis, keepdims=True)
    e = exp(x - shift)
    return e / reduce_sum(e, axis=axis, keepdims=True)


def masked_softmax(logits, mask: np.ndarray, axis: int = -1):
    """Softmax over entries where ``mask`` holds; rows with an empty mask give zeros."""
    mask = np.asarray(mask, dtype=bool)
    raw = np.where(mask, value(logits), -np.inf)
    shift = raw.max(axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    e = exp(where(mask, logits - shift, 0.0)) * mask.astype(np.float64)
    total = reduce_sum(e, axis=axis, keepdims=True)
    return e / clip(total, 1e-300, None)
