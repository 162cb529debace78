"""Dense-tensor computation core with reverse-mode differentiation.

Tensors wrap 64-bit numpy arrays (32-bit via :func:`set_default_dtype`).
Every primitive records its inputs and a backward closure; calling
:meth:`Tensor.backward` on a scalar walks the recorded graph in reverse
topological order and accumulates gradients on trainable leaves.

Message passing is expressed with :func:`gather_rows` and
:func:`scatter_sum` over edge index lists, so no sparse tensor type is
needed.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass

import numpy as np
import scipy.special

from .errors import ContractError, NumericalError, ShapeError

__all__ = [
    "Tensor",
    "set_default_dtype",
    "set_debug",
    "no_grad",
    "zero_grad",
    "glorot",
    "add", "sub", "mul", "div", "matmul", "neg",
    "sigmoid", "tanh", "relu", "exp", "log", "sqrt", "square", "clip",
    "softmax", "concat", "slice_cols", "reshape", "gather_rows", "scatter_sum",
    "reduce_sum", "reduce_mean", "l2norm",
    "grad_check", "GradCheckReport",
]

_DEFAULT_DTYPE = np.float64
_DEBUG = False
_GRAD_ENABLED = True


def set_default_dtype(dtype) -> None:
    """Switch between float64 (default) and float32 storage."""
    global _DEFAULT_DTYPE
    if np.dtype(dtype) not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ContractError(f"unsupported dtype {dtype!r}")
    _DEFAULT_DTYPE = np.dtype(dtype).type


def set_debug(flag: bool) -> None:
    """In debug mode every forward op asserts a finite result."""
    global _DEBUG
    _DEBUG = bool(flag)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference and finite-difference probes)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A dense array with an optional gradient slot.

    ``requires_grad=True`` marks a trainable leaf; gradients accumulate in
    ``grad`` across backward calls until :func:`zero_grad`.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    # Make numpy defer binary ops to our __r*__ methods.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        """Reverse-mode pass from a scalar; accumulates into ``grad``."""
        if self.data.size != 1:
            raise ContractError(f"backward requires a scalar, got shape {self.data.shape}")

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward_fn is not None:
                for parent, pg in zip(node._parents, node._backward_fn(g)):
                    if not parent.requires_grad or pg is None:
                        continue
                    acc = grads.get(id(parent))
                    grads[id(parent)] = pg if acc is None else acc + pg
            elif node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g

    # operator sugar
    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __matmul__(self, other): return matmul(self, other)
    def __neg__(self): return neg(self)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    if _DEBUG and not np.all(np.isfinite(data)):
        raise NumericalError("non-finite value produced by a forward op")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward_fn = backward_fn
    else:
        out._parents = ()
        out._backward_fn = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient over the axes that broadcasting expanded."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"add: {a.data.shape} vs {b.data.shape}") from exc
    return _result(data, (a, b), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        data = a.data - b.data
    except ValueError as exc:
        raise ShapeError(f"sub: {a.data.shape} vs {b.data.shape}") from exc
    return _result(data, (a, b), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))


def neg(a) -> Tensor:
    a = _lift(a)
    return _result(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise ShapeError(f"mul: {a.data.shape} vs {b.data.shape}") from exc
    return _result(
        data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)),
    )


def div(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    try:
        data = a.data / b.data
    except ValueError as exc:
        raise ShapeError(f"div: {a.data.shape} vs {b.data.shape}") from exc
    return _result(
        data, (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: {a.data.shape} @ {b.data.shape}")
    return _result(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def sigmoid(a) -> Tensor:
    a = _lift(a)
    s = scipy.special.expit(a.data)
    return _result(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a) -> Tensor:
    a = _lift(a)
    t = np.tanh(a.data)
    return _result(t, (a,), lambda g: (g * (1.0 - t * t),))


def relu(a) -> Tensor:
    a = _lift(a)
    mask = a.data > 0
    return _result(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = _lift(a)
    e = np.exp(a.data)
    return _result(e, (a,), lambda g: (g * e,))


def log(a) -> Tensor:
    a = _lift(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    # Derivative is smoothed near zero so losses built on sqrt of sums of
    # squares stay differentiable; the forward value is exact.
    a = _lift(a)
    root = np.sqrt(a.data)
    return _result(root, (a,), lambda g: (g / (2.0 * root + 1e-12),))


def square(a) -> Tensor:
    a = _lift(a)
    return _result(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def clip(a, lo: float, hi: float) -> Tensor:
    a = _lift(a)
    mask = (a.data > lo) & (a.data < hi)
    return _result(np.clip(a.data, lo, hi), (a,), lambda g: (g * mask,))


def softmax(a, axis: int = -1) -> Tensor:
    a = _lift(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    return _result(s, (a,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {[t.data.shape for t in tensors]}") from exc
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(data, tuple(tensors), bwd)


def slice_cols(a, start: int, stop: int) -> Tensor:
    a = _lift(a)
    if a.data.ndim != 2:
        raise ShapeError(f"slice_cols expects a matrix, got {a.data.shape}")

    def bwd(g):
        full = np.zeros_like(a.data)
        full[:, start:stop] = g
        return (full,)

    return _result(a.data[:, start:stop].copy(), (a,), bwd)


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = _lift(a)
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: {a.data.shape} -> {shape}") from exc
    return _result(data.copy(), (a,), lambda g: (g.reshape(a.data.shape),))


def gather_rows(a, index: np.ndarray) -> Tensor:
    """Select rows ``a[index]``; duplicate indices allowed."""
    a = _lift(a)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= a.data.shape[0]):
        raise IndexError(f"gather index out of range for {a.data.shape[0]} rows")

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _result(a.data[index], (a,), bwd)


def scatter_sum(a, index: np.ndarray, n_rows: int) -> Tensor:
    """Sum rows of ``a`` into ``n_rows`` buckets given by ``index``."""
    a = _lift(a)
    index = np.asarray(index, dtype=np.int64)
    if index.shape[0] != a.data.shape[0]:
        raise ShapeError(f"scatter_sum: {index.shape[0]} indices for {a.data.shape[0]} rows")
    if index.size and (index.min() < 0 or index.max() >= n_rows):
        raise IndexError(f"scatter index out of range for {n_rows} rows")
    data = np.zeros((n_rows,) + a.data.shape[1:], dtype=a.data.dtype)
    np.add.at(data, index, a.data)
    return _result(data, (a,), lambda g: (g[index],))


def reduce_sum(a, axis: int | None = None) -> Tensor:
    a = _lift(a)
    data = a.data.sum(axis=axis)

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy(),)

    return _result(np.asarray(data), (a,), bwd)


def reduce_mean(a, axis: int | None = None) -> Tensor:
    a = _lift(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(reduce_sum(a, axis=axis), 1.0 / count)


def l2norm(a) -> Tensor:
    """Euclidean norm of the flattened input, as a scalar tensor."""
    a = _lift(a)
    norm = float(np.sqrt((a.data * a.data).sum()))
    return _result(np.asarray(norm), (a,), lambda g: (g * a.data / (norm + 1e-12),))


def zero_grad(params) -> None:
    for p in params.values() if isinstance(params, dict) else params:
        p.grad = None


def glorot(shape: tuple[int, ...], rng: np.random.Generator) -> Tensor:
    """Trainable matrix initialized uniformly in +-sqrt(6/(fan_in+fan_out))."""
    fan_in, fan_out = shape[0], shape[-1]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float]

    def __str__(self) -> str:
        lines = [f"max relative error: {self.max_rel_error:.3e}"]
        lines += [f"  {name}: {err:.3e}" for name, err in self.per_param.items()]
        return "\n".join(lines)


def grad_check(
    loss_fn,
    params: dict[str, Tensor],
    eps: float = 1e-5,
    max_entries_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare reverse-mode gradients against central finite differences.

    ``loss_fn`` must recompute the scalar loss from the current parameter
    values.  For large parameters a random subset of entries per parameter
    can be probed (``max_entries_per_param``); the reported error is the
    max relative error over all probed entries, with relative meaning
    ``|ad - fd| / max(1, |ad|, |fd|)``.
    """
    zero_grad(params)
    loss = loss_fn()
    loss.backward()
    ad_grads = {name: (np.zeros_like(p.data) if p.grad is None else p.grad.copy()) for name, p in params.items()}

    if rng is None:
        rng = np.random.default_rng(0)
    per_param: dict[str, float] = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        n = flat.size
        if max_entries_per_param is not None and n > max_entries_per_param:
            entries = rng.choice(n, size=max_entries_per_param, replace=False)
        else:
            entries = np.arange(n)
        worst = 0.0
        for j in entries:
            old = flat[j]
            with no_grad():
                flat[j] = old + eps
                up = float(loss_fn().data)
                flat[j] = old - eps
                down = float(loss_fn().data)
            flat[j] = old
            fd = (up - down) / (2.0 * eps)
            ad = float(ad_grads[name].reshape(-1)[j])
            worst = max(worst, abs(ad - fd) / max(1.0, abs(ad), abs(fd)))
        per_param[name] = worst
    return GradCheckReport(max_rel_error=max(per_param.values(), default=0.0), per_param=per_param)
