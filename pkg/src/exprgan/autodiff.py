"""Tape-based reverse-mode automatic differentiation over dense arrays.

A :class:`Tape` records every operation whose inputs include a tracked
tensor.  Tensors without a tape are constants: operations on constants only
are evaluated eagerly and never recorded.  Gradients of a scalar root are
accumulated additively into the :class:`ParameterStore` entries that were
bound to the tape through :meth:`Tape.param`.

The working precision is float32.  A float64 store and tape may be used for
verification (finite-difference checks need the extra headroom).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float32

OP_KINDS = (
    "matmul",
    "add",
    "mul",
    "concat",
    "tanh",
    "sigmoid",
    "slice",
    "mean_all",
    "sum_all",
    "abs",
    "square",
    "sub",
    "scale",
    "div",
    "sqrt",
)


class ShapeError(ValueError):
    """Raised when operand dimensions are incompatible for an operation."""


class Tensor:
    """Dense array, optionally tracked by a tape node."""

    __slots__ = ("data", "tape", "node")
    __array_priority__ = 100

    def __init__(self, data, tape: "Tape | None" = None, node: int = -1):
        self.data = data
        self.tape = tape
        self.node = node

    @property
    def dims(self) -> tuple:
        return self.data.shape

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def numpy(self) -> np.ndarray:
        return self.data

    def __float__(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"cannot convert tensor of dims {self.dims} to float")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        kind = "tracked" if self.tracked else "const"
        return f"Tensor({kind}, dims={self.dims})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, other)

    def __rmul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(other, self)

    def __truediv__(self, other):
        if np.isscalar(other):
            return scale(self, 1.0 / other)
        return div(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class _Node:
    __slots__ = ("kind", "inputs", "vjp", "sink")

    def __init__(self, kind, inputs, vjp, sink=None):
        self.kind = kind
        self.inputs = inputs
        self.vjp = vjp
        self.sink = sink


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray | None = None
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    step: int = 0

    def __post_init__(self):
        if self.m is None:
            self.m = np.zeros_like(self.value)
        if self.v is None:
            self.v = np.zeros_like(self.value)


@dataclass
class ParameterStore:
    """Named trainable arrays with gradient accumulators and Adam moments."""

    dtype: type = DTYPE
    entries: dict = field(default_factory=dict)

    def add(self, name: str, value) -> Param:
        if name in self.entries:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Param(np.array(value, dtype=self.dtype))
        self.entries[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def names(self, prefixes: Iterable[str] | None = None) -> list:
        if prefixes is None:
            return list(self.entries)
        prefixes = tuple(prefixes)
        return [n for n in self.entries if n.startswith(prefixes)]

    def value(self, name: str) -> np.ndarray:
        return self.entries[name].value

    def set_value(self, name: str, value) -> None:
        p = self.entries[name]
        value = np.asarray(value, dtype=self.dtype)
        if value.shape != p.value.shape:
            raise ShapeError(f"{name}: expected dims {p.value.shape}, got {value.shape}")
        p.value = value.copy()

    def zero_grad(self) -> None:
        for p in self.entries.values():
            p.grad = None

    def copy(self, dtype=None) -> "ParameterStore":
        dtype = dtype or self.dtype
        out = ParameterStore(dtype=dtype)
        for name, p in self.entries.items():
            out.entries[name] = Param(
                p.value.astype(dtype, copy=True),
                None if p.grad is None else p.grad.astype(dtype, copy=True),
                p.m.astype(dtype, copy=True),
                p.v.astype(dtype, copy=True),
                p.step,
            )
        return out


class Tape:
    """Append-only record of operations; nodes are in topological order."""

    def __init__(self, dtype=DTYPE):
        self.dtype = dtype
        self.nodes: list[_Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def constant(self, value) -> Tensor:
        return Tensor(np.asarray(value, dtype=self.dtype))

    def param(self, store: ParameterStore, name: str) -> Tensor:
        """Bind a store entry as a differentiable leaf."""
        p = store[name]
        value = p.value if p.value.dtype == self.dtype else p.value.astype(self.dtype)
        self.nodes.append(_Node("param", (), None, sink=p))
        return Tensor(value, self, len(self.nodes) - 1)

    def record(self, kind: str, value, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
        ids = tuple(t.node if t.tape is self else -1 for t in inputs)
        self.nodes.append(_Node(kind, ids, vjp))
        return Tensor(value, self, len(self.nodes) - 1)

    def backward(self, root: Tensor) -> None:
        """Accumulate d(root)/d(param) into every bound parameter's ``grad``."""
        if root.tape is not self:
            raise ValueError("root tensor was not produced on this tape")
        if root.data.size != 1:
            raise ShapeError(f"backward needs a scalar root, got dims {root.dims}")
        grads: list = [None] * len(self.nodes)
        grads[root.node] = np.ones_like(root.data)
        for i in range(root.node, -1, -1):
            g = grads[i]
            if g is None:
                continue
            grads[i] = None
            node = self.nodes[i]
            if node.sink is not None:
                sink = node.sink
                g = g.astype(sink.value.dtype, copy=False)
                sink.grad = g.copy() if sink.grad is None else sink.grad + g
                continue
            in_grads = node.vjp(g)
            for j, gj in zip(node.inputs, in_grads):
                if j < 0 or gj is None:
                    continue
                grads[j] = gj if grads[j] is None else grads[j] + gj


def _tape_of(*xs) -> Tape | None:
    for x in xs:
        if isinstance(x, Tensor) and x.tape is not None:
            return x.tape
    return None


def _lift(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else DTYPE
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(kind: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.dims, b.dims)
    except ValueError:
        raise ShapeError(f"{kind}: incompatible dims {a.dims} and {b.dims}") from None


def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.dims[1] != b.dims[0]:
        raise ShapeError(f"matmul: incompatible dims {a.dims} and {b.dims}")
    out = a.data @ b.data
    tape = _tape_of(a, b)
    if tape is None:
        return Tensor(out)
    ad, bd = a.data, b.data
    return tape.record("matmul", out, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def add(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _check_broadcast("add", a, b)
    out = a.data + b.data
    tape = _tape_of(a, b)
    if tape is None:
        return Tensor(out)
    sa, sb = a.dims, b.dims
    return tape.record("add", out, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _check_broadcast("sub", a, b)
    out = a.data - b.data
    tape = _tape_of(a, b)
    if tape is None:
        return Tensor(out)
    sa, sb = a.dims, b.dims
    return tape.record("sub", out, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)))


def mul(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _check_broadcast("mul", a, b)
    out = a.data * b.data
    tape = _tape_of(a, b)
    if tape is None:
        return Tensor(out)
    ad, bd = a.data, b.data
    return tape.record(
        "mul", out, (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def div(a, b) -> Tensor:
    a = _lift(a, b if isinstance(b, Tensor) else None)
    b = _lift(b, a)
    _check_broadcast("div", a, b)
    out = a.data / b.data
    tape = _tape_of(a, b)
    if tape is None:
        return Tensor(out)
    bd = b.data
    sa, sb = a.dims, b.dims
    return tape.record(
        "div", out, (a, b),
        lambda g: (_unbroadcast(g / bd, sa), _unbroadcast(-g * out / bd, sb)),
    )


def scale(a: Tensor, c: float) -> Tensor:
    a = _lift(a)
    c = a.data.dtype.type(c)
    out = a.data * c
    if a.tape is None:
        return Tensor(out)
    return a.tape.record("scale", out, (a,), lambda g: (g * c,))


def concat(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis."""
    tensors = [_lift(t) for t in tensors]
    lead = tensors[0].dims[:-1]
    for t in tensors[1:]:
        if t.dims[:-1] != lead:
            raise ShapeError(
                "concat: leading dims differ: " + ", ".join(str(t.dims) for t in tensors)
            )
    out = np.concatenate([t.data for t in tensors], axis=-1)
    tape = _tape_of(*tensors)
    if tape is None:
        return Tensor(out)
    bounds = np.cumsum([0] + [t.dims[-1] for t in tensors])

    def vjp(g):
        return tuple(g[..., bounds[k]:bounds[k + 1]] for k in range(len(tensors)))

    return tape.record("concat", out, tensors, vjp)


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    """Columns ``start:stop`` of the last axis."""
    n = a.dims[-1]
    if not 0 <= start < stop <= n:
        raise ShapeError(f"slice: range [{start}, {stop}) invalid for dims {a.dims}")
    out = a.data[..., start:stop]
    if a.tape is None:
        return Tensor(out)
    shape, dtype = a.dims, a.data.dtype

    def vjp(g):
        full = np.zeros(shape, dtype=dtype)
        full[..., start:stop] = g
        return (full,)

    return a.tape.record("slice", out, (a,), vjp)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    if a.tape is None:
        return Tensor(out)
    return a.tape.record("tanh", out, (a,), lambda g: (g * (1 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1 / (1 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1 + ex)
    if a.tape is None:
        return Tensor(out)
    return a.tape.record("sigmoid", out, (a,), lambda g: (g * out * (1 - out),))


def abs_(a: Tensor) -> Tensor:
    x = a.data
    out = np.abs(x)
    if a.tape is None:
        return Tensor(out)
    return a.tape.record("abs", out, (a,), lambda g: (g * np.sign(x),))


def square(a: Tensor) -> Tensor:
    x = a.data
    out = x * x
    if a.tape is None:
        return Tensor(out)
    return a.tape.record("square", out, (a,), lambda g: (g * 2 * x,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    if a.tape is None:
        return Tensor(out)
    return a.tape.record("sqrt", out, (a,), lambda g: (g / (2 * out),))


def sum_all(a: Tensor) -> Tensor:
    out = a.data.sum(dtype=a.data.dtype).reshape(())
    if a.tape is None:
        return Tensor(out)
    shape = a.dims
    return a.tape.record("sum_all", out, (a,), lambda g: (np.broadcast_to(g, shape),))


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = (a.data.sum(dtype=a.data.dtype) / a.data.dtype.type(n)).reshape(())
    if a.tape is None:
        return Tensor(out)
    shape = a.dims
    return a.tape.record("mean_all", out, (a,), lambda g: (np.broadcast_to(g / n, shape),))


_DISPATCH = {
    "matmul": matmul,
    "add": add,
    "mul": mul,
    "sub": sub,
    "div": div,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "abs": abs_,
    "square": square,
    "sqrt": sqrt,
    "sum_all": sum_all,
    "mean_all": mean_all,
}


def forward_op(kind: str, *inputs, **kwargs) -> Tensor:
    """Apply an operation by name.

    ``concat`` takes the tensors as positional inputs, ``slice`` takes
    ``start``/``stop`` keywords and ``scale`` takes a ``factor`` keyword.
    """
    if kind == "concat":
        return concat(inputs)
    if kind == "slice":
        return slice_last(inputs[0], kwargs["start"], kwargs["stop"])
    if kind == "scale":
        return scale(inputs[0], kwargs["factor"])
    try:
        fn = _DISPATCH[kind]
    except KeyError:
        raise ValueError(f"unknown op kind {kind!r}; expected one of {OP_KINDS}") from None
    return fn(*inputs)


def adam_step(
    store: ParameterStore,
    lr: float,
    beta1: float = 0.0,
    beta2: float = 0.99,
    eps: float = 1e-8,
    lr_scale: dict | None = None,
) -> None:
    """Bias-corrected Adam update on every entry holding a gradient, then clear it.

    ``lr_scale`` maps name prefixes to learning-rate multipliers; the first
    matching prefix wins and unmatched entries use ``lr`` as is.
    """
    for name, p in store.entries.items():
        if p.grad is None:
            continue
        step_lr = lr
        for prefix, scale in (lr_scale or {}).items():
            if name.startswith(prefix):
                step_lr = lr * scale
                break
        t = np.dtype(p.value.dtype).type
        g = p.grad
        p.step += 1
        p.m = t(beta1) * p.m + t(1 - beta1) * g
        p.v = t(beta2) * p.v + t(1 - beta2) * (g * g)
        mhat = p.m / t(1 - beta1 ** p.step)
        vhat = p.v / t(1 - beta2 ** p.step)
        p.value = p.value - t(step_lr) * mhat / (np.sqrt(vhat) + t(eps))
        p.grad = None
