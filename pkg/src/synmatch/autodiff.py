"""Minimal reverse-mode gradient tape over dense float64 matrices.

All model math runs on 2-D numpy float64 arrays; scalars are 1x1 matrices.
`Var` wraps one matrix as a node in an operation graph. Applying the ops in
this module to `Var`s records the graph; `backward` replays it in reverse
topological order and accumulates gradients. `grad` evaluates a scalar loss
builder over a named parameter set and returns every gradient;
`finite_diff_check` verifies those gradients against central differences.

Gradients are accumulated in a per-call table rather than on the nodes, so
`Var`s are immutable after construction and independent graphs can be
evaluated concurrently. Evaluating the same graph twice yields bitwise
identical results.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError


def as_matrix(x):
    """Coerce `x` to a 2-D float64 array; scalars become 1x1."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise ShapeError(f"expected matrix, got array of shape {a.shape}")
    return a


class Var:
    """One node of the recorded operation graph.

    `parents` are the input nodes; `backward_fn`, given the output gradient,
    returns one gradient array per parent (already reduced to the parent's
    shape). Leaf nodes have no backward_fn.
    """

    __slots__ = ("value", "parents", "backward_fn")

    # make `ndarray <op> Var` fall through to our reflected operators instead
    # of numpy broadcasting Var as an object scalar
    __array_ufunc__ = None

    def __init__(self, value, parents=(), backward_fn=None):
        self.value = value if isinstance(value, np.ndarray) and value.ndim == 2 \
            and value.dtype == np.float64 else as_matrix(value)
        self.parents = parents
        self.backward_fn = backward_fn

    @property
    def shape(self):
        return self.value.shape

    def item(self):
        if self.value.size != 1:
            raise ShapeError(f"item() on non-scalar of shape {self.shape}")
        return float(self.value[0, 0])

    # operator sugar; non-Var operands are lifted to constants
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def lift(x):
    """Wrap `x` as a constant leaf unless it already is a Var."""
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(g, shape):
    # reduce an output gradient back to an input that was broadcast up
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    if g.shape != shape:
        raise ShapeError(f"cannot reduce gradient {g.shape} to {shape}")
    return g


def _check_broadcast(sa, sb):
    for da, db in zip(sa, sb):
        if da != db and da != 1 and db != 1:
            raise ShapeError(f"shapes {sa} and {sb} do not broadcast")


# ---------------------------------------------------------------------------
# elementwise ops

def add(a, b):
    a, b = lift(a), lift(b)
    _check_broadcast(a.shape, b.shape)
    return Var(a.value + b.value, (a, b),
               lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = lift(a), lift(b)
    _check_broadcast(a.shape, b.shape)
    return Var(a.value - b.value, (a, b),
               lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = lift(a), lift(b)
    _check_broadcast(a.shape, b.shape)
    return Var(a.value * b.value, (a, b),
               lambda g: (_unbroadcast(g * b.value, a.shape),
                          _unbroadcast(g * a.value, b.shape)))


def div(a, b):
    a, b = lift(a), lift(b)
    _check_broadcast(a.shape, b.shape)
    out = a.value / b.value
    return Var(out, (a, b),
               lambda g: (_unbroadcast(g / b.value, a.shape),
                          _unbroadcast(-g * a.value / (b.value * b.value), b.shape)))


def scale(a, c):
    a = lift(a)
    c = float(c)
    return Var(a.value * c, (a,), lambda g: (g * c,))


def square(a):
    a = lift(a)
    return Var(a.value * a.value, (a,), lambda g: (2.0 * a.value * g,))


def sqrt(a):
    a = lift(a)
    y = np.sqrt(a.value)
    return Var(y, (a,), lambda g: (g / (2.0 * y),))


def exp(a):
    a = lift(a)
    y = np.exp(a.value)
    return Var(y, (a,), lambda g: (g * y,))


def sigmoid(a):
    a = lift(a)
    x = a.value
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])  # safe: only negative inputs
    y[~pos] = ex / (1.0 + ex)
    return Var(y, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a):
    a = lift(a)
    y = np.tanh(a.value)
    return Var(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a):
    """max(x, 0) elementwise; subgradient 0 at x = 0."""
    a = lift(a)
    y = np.maximum(a.value, 0.0)
    return Var(y, (a,), lambda g: (g * (a.value > 0.0),))


# ---------------------------------------------------------------------------
# matrix ops

def matmul(a, b):
    """Row-major matrix product; raises ShapeError naming both shapes."""
    if not isinstance(a, Var) and not isinstance(b, Var):
        a2, b2 = as_matrix(a), as_matrix(b)
        if a2.shape[1] != b2.shape[0]:
            raise ShapeError(f"cannot multiply {a2.shape} by {b2.shape}")
        return a2 @ b2
    a, b = lift(a), lift(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return Var(a.value @ b.value, (a, b),
               lambda g: (g @ b.value.T, a.value.T @ g))


def transpose(a):
    a = lift(a)
    return Var(a.value.T.copy(), (a,), lambda g: (g.T.copy(),))


def sum_all(a):
    a = lift(a)
    return Var(np.array([[a.value.sum()]]), (a,),
               lambda g: (np.full_like(a.value, g[0, 0]),))


def sum_axis(a, axis):
    a = lift(a)
    return Var(a.value.sum(axis=axis, keepdims=True), (a,),
               lambda g: (np.broadcast_to(g, a.shape).copy(),))


def max_axis(a, axis):
    """Max along an axis (keepdims). Gradient flows to the first maximum."""
    a = lift(a)
    idx = np.argmax(a.value, axis=axis)
    out = np.take_along_axis(a.value, np.expand_dims(idx, axis), axis=axis)

    def backward(g):
        z = np.zeros_like(a.value)
        np.put_along_axis(z, np.expand_dims(idx, axis), g, axis=axis)
        return (z,)

    return Var(out, (a,), backward)


def rows(a, start, stop):
    a = lift(a)

    def backward(g):
        z = np.zeros_like(a.value)
        z[start:stop] = g
        return (z,)

    return Var(a.value[start:stop].copy(), (a,), backward)


def cols(a, start, stop):
    a = lift(a)

    def backward(g):
        z = np.zeros_like(a.value)
        z[:, start:stop] = g
        return (z,)

    return Var(a.value[:, start:stop].copy(), (a,), backward)


def concat_rows(a, b):
    a, b = lift(a), lift(b)
    if a.shape[1] != b.shape[1]:
        raise ShapeError(f"cannot stack {a.shape} over {b.shape}")
    na = a.shape[0]
    return Var(np.concatenate([a.value, b.value], axis=0), (a, b),
               lambda g: (g[:na].copy(), g[na:].copy()))


def concat_cols(a, b):
    a, b = lift(a), lift(b)
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"cannot concatenate {a.shape} beside {b.shape}")
    na = a.shape[1]
    return Var(np.concatenate([a.value, b.value], axis=1), (a, b),
               lambda g: (g[:, :na].copy(), g[:, na:].copy()))


def take_rows(a, idx):
    """Gather rows by integer index; gradients scatter-add back."""
    a = lift(a)
    idx = np.asarray(idx, dtype=np.intp)

    def backward(g):
        z = np.zeros_like(a.value)
        np.add.at(z, idx, g)
        return (z,)

    return Var(a.value[idx], (a,), backward)


# ---------------------------------------------------------------------------
# softmax

def _softmax_np(x, axis):
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _softmax(a, axis):
    a = lift(a)
    y = _softmax_np(a.value, axis)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        return (y * (g - dot),)

    return Var(y, (a,), backward)


def softmax_rows(x):
    """Softmax over each row, stabilised by row-max subtraction."""
    if isinstance(x, Var):
        return _softmax(x, axis=1)
    return _softmax_np(as_matrix(x), axis=1)


def softmax_cols(x):
    """Softmax over each column, stabilised by column-max subtraction."""
    if isinstance(x, Var):
        return _softmax(x, axis=0)
    return _softmax_np(as_matrix(x), axis=0)


# ---------------------------------------------------------------------------
# gradient evaluation

def _topo_order(root):
    order = []
    state = {}  # id -> 1 visiting, 2 done
    stack = [root]
    while stack:
        node = stack[-1]
        st = state.get(id(node), 0)
        if st == 0:
            state[id(node)] = 1
            for p in node.parents:
                if state.get(id(p), 0) == 0:
                    stack.append(p)
        else:
            stack.pop()
            if st == 1:
                state[id(node)] = 2
                order.append(node)
    return order  # inputs before consumers


def backward(loss, wrt):
    """Gradients of scalar `loss` with respect to each Var in `wrt`."""
    if loss.value.size != 1:
        raise ShapeError(f"loss must be scalar, got shape {loss.shape}")
    order = _topo_order(loss)

    # only propagate through nodes that can reach a requested leaf
    wanted = {id(w) for w in wrt}
    needed = set()
    for node in order:
        if id(node) in wanted or any(id(p) in needed for p in node.parents):
            needed.add(id(node))

    grads = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if id(parent) not in needed:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
    return [grads.get(id(w), np.zeros_like(w.value)) for w in wrt]


def grad(loss_builder, params):
    """Evaluate `loss_builder` over named parameters and differentiate.

    `loss_builder` receives a dict name -> Var and must return a scalar Var.
    Returns (loss value, dict name -> gradient array). Raises NumericError if
    the loss is not finite.
    """
    names = list(params)
    leaves = {name: Var(np.array(params[name], dtype=np.float64, copy=True))
              for name in names}
    loss = loss_builder(leaves)
    value = loss.item()
    if not np.isfinite(value):
        raise NumericError(f"loss is not finite: {value}")
    gs = backward(loss, [leaves[name] for name in names])
    return value, dict(zip(names, gs))


@dataclass
class FiniteDiffReport:
    """Worst-case disagreement between tape gradients and central differences."""
    max_rel_error: float
    worst_param: str | None
    worst_index: tuple | None
    entries: int

    def __str__(self):
        where = f"{self.worst_param}{list(self.worst_index)}" if self.worst_param else "-"
        return f"max rel error {self.max_rel_error:.3e} at {where} ({self.entries} entries)"


def finite_diff_check(loss_builder, params, eps=1e-4, floor=1e-3):
    """Compare tape gradients against central differences, entry by entry.

    Relative error per entry is |ad - fd| / (|ad| + |fd| + floor); the floor
    keeps entries too small for the step size to resolve from dominating.
    Returns a FiniteDiffReport with the worst entry and its parameter name.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    base = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    _, gs = grad(loss_builder, base)

    def value_at(p):
        out = loss_builder({k: Var(v) for k, v in p.items()})
        return out.item()

    worst = FiniteDiffReport(0.0, None, None, 0)
    for name, arr in base.items():
        ad = gs[name]
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + eps
            f_plus = value_at(base)
            arr[idx] = orig - eps
            f_minus = value_at(base)
            arr[idx] = orig
            fd = (f_plus - f_minus) / (2.0 * eps)
            rel = abs(ad[idx] - fd) / (abs(ad[idx]) + abs(fd) + floor)
            worst.entries += 1
            if rel > worst.max_rel_error:
                worst.max_rel_error = rel
                worst.worst_param = name
                worst.worst_index = idx
    return worst
