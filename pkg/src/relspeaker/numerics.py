"""Dense float64 tensors with define-by-run reverse-mode differentiation.

The primitive set is deliberately closed: matmul, elementwise add/mul,
sigmoid, tanh, softmax, concatenation, row lookup (embedding), basic
slicing and cross-entropy.  Everything else in the package (GRUs, heads,
losses) is composed from these, so gradient tests only need to cover them.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference, finite differences)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], tuple] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Populate ``.grad`` on every tracked ancestor of this scalar.

        Gradients are added to whatever ``.grad`` already holds, so calling
        this twice without ``zero_grad`` doubles them.
        """
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = _topo_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            node.grad = g.copy() if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                prev = grads.get(id(parent))
                grads[id(parent)] = pg if prev is None else prev + pg

    # operator sugar; subtraction and negation are compositions of add/mul
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(_as_tensor(other), mul(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice_(self, idx)


def _topo_order(root: Tensor) -> list[Tensor]:
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    track = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = track
    if track:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return _result(a.data + b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        ga = _unbroadcast(g * bd, ad.shape) if a.requires_grad else None
        gb = _unbroadcast(g * ad, bd.shape) if b.requires_grad else None
        return ga, gb

    return _result(ad * bd, (a, b), backward)


def matmul(a, b) -> Tensor:
    """``a @ b`` for ``a`` of shape (..., k) and a 2-D ``b`` of shape (k, m)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if b.ndim != 2 or a.shape[-1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g @ bd.T if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = ad.reshape(-1, bd.shape[0]).T @ g.reshape(-1, bd.shape[1])
        return ga, gb

    return _result(ad @ bd, (a, b), backward)


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so large |x| never overflows exp
    d = x.data
    e = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def backward(g):
        return (g * out * (1.0 - out),)

    return _result(out, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _result(out, (x,), backward)


def _softmax_np(d: np.ndarray) -> np.ndarray:
    e = np.exp(d - d.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    out = _softmax_np(x.data)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _result(out, (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(out, tensors, backward)


def lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of a 2-D ``table``; output shape is ``ids.shape + (D,)``."""
    ids = np.asarray(ids, dtype=np.int64)
    n = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise IndexError(f"lookup id out of range for table with {n} rows")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return (full,)

    return _result(table.data[ids], (table,), backward)


def slice_(x: Tensor, idx) -> Tensor:
    """Basic (view) indexing; fancy indexing goes through :func:`lookup`."""
    if isinstance(idx, (list, np.ndarray)):
        raise TypeError("slice_ supports basic indexing only; use lookup for gathers")
    shape = x.shape

    def backward(g):
        full = np.zeros(shape, dtype=DTYPE)
        full[idx] = g
        return (full,)

    return _result(x.data[idx], (x,), backward)


def cross_entropy(logits: Tensor, target) -> Tensor:
    """Mean of ``-log softmax(logits)[target]`` over rows.

    ``logits`` is (K,) with an int target, or (N, K) with N int targets.
    """
    d = logits.data
    single = d.ndim == 1
    d2 = d.reshape(1, -1) if single else d
    t = np.atleast_1d(np.asarray(target, dtype=np.int64))
    n, k = d2.shape
    if k < 2:
        raise ValueError("cross_entropy needs at least 2 classes")
    if t.shape != (n,):
        raise ValueError(f"expected {n} targets, got shape {t.shape}")
    if n and (t.min() < 0 or t.max() >= k):
        raise ValueError(f"target out of range [0, {k})")
    shifted = d2 - d2.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    nll = logz - shifted[rows, t]
    loss = np.asarray(nll.mean())

    def backward(g):
        p = np.exp(shifted - logz[:, None])
        p[rows, t] -= 1.0
        p *= g / n
        return (p.reshape(d.shape),)

    return _result(loss, (logits,), backward)


# --------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, param: Tensor, **kw) -> "AdamState":
        return cls(np.zeros_like(param.data), np.zeros_like(param.data), **kw)


def adam_step(param: Tensor, state: AdamState, lr: float) -> tuple[Tensor, AdamState]:
    """One bias-corrected Adam update, in place.  ``param.grad`` is left alone."""
    if state.first_moment.shape != param.shape or state.second_moment.shape != param.shape:
        raise ValueError(
            f"Adam state shape {state.first_moment.shape} does not match parameter {param.shape}"
        )
    if param.grad is None:
        raise ValueError("adam_step called on a parameter without a gradient")
    g = param.grad
    b1, b2 = state.beta1, state.beta2
    state.step_count += 1
    t = state.step_count
    state.first_moment *= b1
    state.first_moment += (1.0 - b1) * g
    state.second_moment *= b2
    state.second_moment += (1.0 - b2) * g * g
    m_hat = state.first_moment / (1.0 - b1**t)
    v_hat = state.second_moment / (1.0 - b2**t)
    param.data -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return param, state


class Adam:
    """Adam over a named parameter collection."""

    def __init__(self, params: dict[str, Tensor], beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.params = params
        self.states = {
            k: AdamState.zeros_like(p, beta1=beta1, beta2=beta2, epsilon=epsilon)
            for k, p in params.items()
        }

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float) -> None:
        for k, p in self.params.items():
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            adam_step(p, self.states[k], lr)


# --------------------------------------------------------------------------
# gradient verification


def numerical_grad(f: Callable[[], float], x: Tensor, h: float = 1e-5,
                   indices: Iterable[tuple[int, ...]] | None = None) -> np.ndarray:
    """Central finite differences of the scalar ``f()`` w.r.t. entries of ``x``.

    Entries not listed in ``indices`` are left at zero.
    """
    grad = np.zeros_like(x.data)
    if indices is None:
        indices = np.ndindex(*x.shape)
    with no_grad():
        for i in indices:
            orig = x.data[i]
            x.data[i] = orig + h
            fp = float(f())
            x.data[i] = orig - h
            fm = float(f())
            x.data[i] = orig
            grad[i] = (fp - fm) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """Max over entries of ``|a - n| / max(|a|, |n|, floor)``.

    The floor keeps entries whose true gradient is ~0 from reporting
    finite-difference roundoff as a large relative error.
    """
    a, n = np.asarray(analytic), np.asarray(numeric)
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def check_gradients(loss_fn: Callable[[], Tensor], params: dict[str, Tensor],
                    h: float = 1e-5, max_entries: int | None = None,
                    rng: np.random.Generator | None = None) -> dict[str, float]:
    """Compare backprop against central differences for each named parameter.

    ``max_entries`` subsamples large tensors (with ``rng``); ``None`` checks
    every entry.  Returns the max relative error per parameter name.
    """
    for p in params.values():
        p.grad = None
    loss_fn().backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}

    def f():
        return loss_fn().data

    errors = {}
    for k, p in params.items():
        idx = list(np.ndindex(*p.shape))
        if max_entries is not None and len(idx) > max_entries:
            rng = rng or np.random.default_rng(0)
            pick = rng.choice(len(idx), size=max_entries, replace=False)
            idx = [idx[i] for i in sorted(pick)]
        num = numerical_grad(f, p, h=h, indices=idx)
        sel = tuple(np.array(idx).T)
        errors[k] = relative_error(analytic[k][sel], num[sel])
    return errors
