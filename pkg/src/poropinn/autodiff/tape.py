"""Reverse-mode automatic differentiation over numpy arrays.

A small scalar-output tape: `Var` wraps an ndarray (or float) and records the
operation that produced it. `backward` accumulates adjoints from a scalar root
down to leaf variables in a fixed topological order, so gradient reduction is
deterministic for a fixed graph.

Network forward passes enter the graph through multi-output primitive nodes
(see `jets.MlpJetNode`); the tape sweeps adjoints down to those nodes, which
then run their own hand-written backward into the parameter leaves.
"""

from __future__ import annotations

import numpy as np


class NonFiniteLossError(RuntimeError):
    """A loss term evaluated to NaN or Inf."""

    def __init__(self, term: str):
        super().__init__(f"non-finite value in loss term '{term}'")
        self.term = term


def _unbroadcast(adj, shape):
    """Sum an adjoint down to `shape` (inverse of numpy broadcasting)."""
    if shape == ():
        return np.sum(adj)
    adj = np.asarray(adj)
    while adj.ndim > len(shape):
        adj = adj.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and adj.shape[ax] != 1:
            adj = adj.sum(axis=ax, keepdims=True)
    return adj


class Var:
    """A node in the computation graph."""

    __slots__ = ("data", "parents", "vjp", "node", "slot")

    # make ndarray <op> Var dispatch to our reflected operators instead of
    # numpy's elementwise object broadcasting
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, data, parents=(), vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = parents
        self.vjp = vjp
        self.node = None  # set by multi-output primitives
        self.slot = None

    @property
    def shape(self):
        return self.data.shape

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        o = _ensure(other)
        return Var(self.data + o.data, (self, o),
                   lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, o.shape)))

    __radd__ = __add__

    def __sub__(self, other):
        o = _ensure(other)
        return Var(self.data - o.data, (self, o),
                   lambda g: (_unbroadcast(g, self.shape), _unbroadcast(-g, o.shape)))

    def __rsub__(self, other):
        return _ensure(other).__sub__(self)

    def __mul__(self, other):
        o = _ensure(other)
        return Var(self.data * o.data, (self, o),
                   lambda g: (_unbroadcast(g * o.data, self.shape),
                              _unbroadcast(g * self.data, o.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _ensure(other)
        return Var(self.data / o.data, (self, o),
                   lambda g: (_unbroadcast(g / o.data, self.shape),
                              _unbroadcast(-g * self.data / o.data**2, o.shape)))

    def __rtruediv__(self, other):
        return _ensure(other).__truediv__(self)

    def __neg__(self):
        return Var(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, n):
        if not isinstance(n, (int, float)):
            raise TypeError("only constant exponents are supported")
        return Var(self.data**n, (self,),
                   lambda g: (g * n * self.data**(n - 1),))


def _ensure(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def constant(x) -> Var:
    return Var(x)


# -- elementwise functions --------------------------------------------------

def tanh(x):
    if not isinstance(x, Var):
        return np.tanh(x)
    y = np.tanh(x.data)
    return Var(y, (x,), lambda g: (g * (1.0 - y**2),))


def exp(x):
    if not isinstance(x, Var):
        return np.exp(x)
    y = np.exp(x.data)
    return Var(y, (x,), lambda g: (g * y,))


def sqrt(x):
    if not isinstance(x, Var):
        return np.sqrt(x)
    y = np.sqrt(x.data)
    return Var(y, (x,), lambda g: (g * 0.5 / y,))


def square(x):
    if not isinstance(x, Var):
        return np.square(x)
    return Var(x.data**2, (x,), lambda g: (g * 2.0 * x.data,))


def power(x, n):
    """x**n for constant n; safe for non-integer n on non-negative x."""
    if not isinstance(x, Var):
        return x**n
    return x**n


def maximum(x, c):
    """Elementwise max with a constant (clamp floor); subgradient 1 where x > c."""
    if not isinstance(x, Var):
        return np.maximum(x, c)
    mask = x.data > c
    return Var(np.maximum(x.data, c), (x,), lambda g: (g * mask,))


def minimum(x, c):
    if not isinstance(x, Var):
        return np.minimum(x, c)
    mask = x.data < c
    return Var(np.minimum(x.data, c), (x,), lambda g: (g * mask,))


def relu(x):
    return maximum(x, 0.0)


# -- reductions -------------------------------------------------------------

def vsum(x):
    x = _ensure(x)
    return Var(np.sum(x.data), (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),))


def mean(x):
    x = _ensure(x)
    n = max(x.data.size, 1)
    return Var(np.mean(x.data), (x,),
               lambda g: (np.broadcast_to(g / n, x.shape).copy(),))


def mean_sq(x):
    """Mean of squares: the norm used for every loss term."""
    return mean(square(x))


# -- backward pass ----------------------------------------------------------

def _toposort(root: Var):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        var, expanded = stack.pop()
        if expanded:
            order.append(var)
            continue
        if id(var) in seen:
            continue
        seen.add(id(var))
        stack.append((var, True))
        for p in var.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Var, leaves) -> dict:
    """Gradient of scalar `root` with respect to each Var in `leaves`.

    Returns {id(leaf): ndarray}. Leaves not reachable from `root` get zeros.
    """
    if root.data.shape != ():
        raise ValueError("backward expects a scalar root")
    grads = {id(root): np.asarray(1.0)}
    nodes = []
    for var in reversed(_toposort(root)):
        g = grads.pop(id(var), None)
        if g is None:
            continue
        if var.node is not None:
            var.node.accumulate(var.slot, g)
            if not var.node._queued:
                var.node._queued = True
                nodes.append(var.node)
        if var.vjp is not None:
            for parent, pg in zip(var.parents, var.vjp(g)):
                pid = id(parent)
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg
        elif var.parents:
            raise RuntimeError("non-leaf Var without vjp")
        grads[id(var)] = g  # keep for leaves requested below
    out = {}
    for leaf in leaves:
        out[id(leaf)] = grads.get(id(leaf), np.zeros_like(leaf.data))
    for node in nodes:
        node.backward_into(out)
        node.reset()
    return out
