"""Forward propagation of second-order jets through tanh MLPs.

A jet carries (value, gradient, Hessian) of a scalar field with respect to the
network's spatio-temporal inputs. Jets are propagated layer by layer in closed
form, batched over collocation points, so first and second input derivatives
are exact to machine precision.

The batched forward pass is also a differentiable tape primitive: its
hand-written backward maps adjoints of (value, gradient, Hessian) outputs to
gradients with respect to every weight matrix and bias vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .tape import Var


def sym_pairs(arity: int):
    """Index pairs (i, j), i <= j, for triangular Hessian storage."""
    return [(i, j) for i in range(arity) for j in range(arity) if i <= j]


@dataclass
class Jet2:
    """Value, gradient and symmetric Hessian of a scalar at one point."""

    value: float
    grad: np.ndarray   # (arity,)
    hess: np.ndarray   # (arity, arity), symmetric

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=np.float64)
        self.hess = np.asarray(self.hess, dtype=np.float64)


# -- raw batched forward / backward -----------------------------------------
#
# Activation layout per layer, batched over N points with input arity A and
# P = A(A+1)/2 triangular Hessian slots:
#   val  (N, H)       field values per neuron
#   g    (N, A, H)    d/dx_a
#   h    (N, P, H)    d2/dx_a dx_b for triangular pair slots


def _jet_input(X: np.ndarray):
    N, A = X.shape
    pairs = sym_pairs(A)
    val = X.astype(np.float64)
    g = np.broadcast_to(np.eye(A), (N, A, A)).copy()
    h = np.zeros((N, len(pairs), A))
    return val, g, h, pairs


def jet_forward_raw(weights, biases, X):
    """Forward pass. Returns output jets (squeezed to scalar width) + cache."""
    val, g, h, pairs = _jet_input(X)
    d_idx = np.array([d for d, _ in pairs])
    e_idx = np.array([e for _, e in pairs])
    n_layers = len(weights)
    cache = []
    for li, (W, b) in enumerate(zip(weights, biases)):
        a_val, a_g, a_h = val, g, h
        val = a_val @ W.T + b
        g = a_g @ W.T
        h = a_h @ W.T
        if li < n_layers - 1:  # tanh on hidden layers, identity on output
            z_g, z_h = g, h
            y = np.tanh(val)
            s = 1.0 - y**2
            g = s[:, None, :] * z_g
            outer = z_g[:, d_idx, :] * z_g[:, e_idx, :]
            h = s[:, None, :] * z_h - 2.0 * (y * s)[:, None, :] * outer
            val = y
            cache.append((a_val, a_g, a_h, y, z_g, z_h))
        else:
            cache.append((a_val, a_g, a_h, None, None, None))
    return val[:, 0], g[:, :, 0], h[:, :, 0], (cache, pairs)


def jet_backward_raw(weights, cache_all, val_bar, g_bar, h_bar):
    """Backward pass of `jet_forward_raw` into parameter gradients.

    Adjoint inputs may be None (treated as zero). Returns (dWs, dbs).
    """
    cache, pairs = cache_all
    N = cache[0][0].shape[0]
    A = cache[0][1].shape[1]
    P = len(pairs)
    y_bar = np.zeros((N, 1)) if val_bar is None else val_bar[:, None].copy()
    yg_bar = np.zeros((N, A, 1)) if g_bar is None else g_bar[:, :, None].copy()
    yh_bar = np.zeros((N, P, 1)) if h_bar is None else h_bar[:, :, None].copy()
    dWs, dbs = [], []
    n_layers = len(weights)
    for li in range(n_layers - 1, -1, -1):
        W = weights[li]
        a_val, a_g, a_h, y, z_g, z_h = cache[li]
        if li < n_layers - 1:
            # back through tanh: y = tanh(z), s = 1 - y^2
            s = 1.0 - y**2
            ys = y * s
            z_val_bar = y_bar * s
            z_g_bar = yg_bar * s[:, None, :]
            z_h_bar = yh_bar * s[:, None, :]
            # d(yg)/dz and d(yh)/dz routed into z_val_bar
            d_idx = np.array([d for d, _ in pairs])
            e_idx = np.array([e for _, e in pairs])
            z_val_bar += -2.0 * ys * (yg_bar * z_g).sum(axis=1)
            z_val_bar += -2.0 * ys * (yh_bar * z_h).sum(axis=1)
            gdge = z_g[:, d_idx, :] * z_g[:, e_idx, :]
            z_val_bar += -2.0 * (s * (1.0 - 3.0 * y**2)) * (
                yh_bar * gdge).sum(axis=1)
            # d(yh)/d(zg): yh[k=(d,e)] has term -2ys * zg_d * zg_e
            coef = -2.0 * ys[:, None, :] * yh_bar  # (N, P, H)
            for k, (d, e) in enumerate(pairs):
                z_g_bar[:, d, :] += coef[:, k, :] * z_g[:, e, :]
                z_g_bar[:, e, :] += coef[:, k, :] * z_g[:, d, :]
        else:
            z_val_bar, z_g_bar, z_h_bar = y_bar, yg_bar, yh_bar
        # back through the affine map z = a W^T + b; stacking the value,
        # gradient and Hessian slots turns three contractions into one
        # BLAS-sized matmul
        I = a_val.shape[1]
        O = z_val_bar.shape[-1]
        z_stack = np.concatenate(
            (z_val_bar[:, None, :], z_g_bar, z_h_bar), axis=1)
        a_stack = np.concatenate((a_val[:, None, :], a_g, a_h), axis=1)
        dW = z_stack.reshape(-1, O).T @ a_stack.reshape(-1, I)
        db = z_val_bar.sum(axis=0)
        dWs.append(dW)
        dbs.append(db)
        if li > 0:
            back = z_stack.reshape(-1, O) @ W
            back = back.reshape(N, 1 + A + P, I)
            y_bar = back[:, 0, :]
            yg_bar = back[:, 1:1 + A, :]
            yh_bar = back[:, 1 + A:, :]
    dWs.reverse()
    dbs.reverse()
    return dWs, dbs


def jet_forward(params, x) -> Jet2:
    """Exact value/gradient/Hessian of a network output at one point.

    `params` is anything with `.weights` and `.biases` lists; `x` must match
    the first layer's input arity.
    """
    x = np.asarray(x, dtype=np.float64)
    arity = params.weights[0].shape[1]
    if x.shape != (arity,):
        raise ValueError(
            f"input has shape {x.shape}, network expects ({arity},)")
    val, g, h, _ = jet_forward_raw(params.weights, params.biases, x[None, :])
    hess = np.empty((arity, arity))
    for k, (i, j) in enumerate(sym_pairs(arity)):
        hess[i, j] = hess[j, i] = h[0, k]
    return Jet2(float(val[0]), g[0], hess)


# -- tape primitive ----------------------------------------------------------


class MlpJetNode:
    """Multi-output tape primitive for one batched network jet evaluation."""

    def __init__(self, w_vars, b_vars, cache, weights):
        self.w_vars = w_vars
        self.b_vars = b_vars
        self.cache = cache
        self.weights = weights
        self._queued = False
        self.val_bar = None
        self.g_bar = {}
        self.h_bar = {}

    def accumulate(self, slot, adj):
        kind, idx = slot
        if kind == "val":
            self.val_bar = adj if self.val_bar is None else self.val_bar + adj
        elif kind == "g":
            self.g_bar[idx] = self.g_bar.get(idx, 0.0) + adj
        else:
            self.h_bar[idx] = self.h_bar.get(idx, 0.0) + adj

    def backward_into(self, grads: dict):
        cache, pairs = self.cache
        N = cache[0][0].shape[0]
        A = cache[0][1].shape[1]
        g_bar = None
        if self.g_bar:
            g_bar = np.zeros((N, A))
            for d, adj in self.g_bar.items():
                g_bar[:, d] = adj
        h_bar = None
        if self.h_bar:
            h_bar = np.zeros((N, len(pairs)))
            for k, adj in self.h_bar.items():
                h_bar[:, k] = adj
        dWs, dbs = jet_backward_raw(self.weights, self.cache,
                                    self.val_bar, g_bar, h_bar)
        for wv, bv, dW, db in zip(self.w_vars, self.b_vars, dWs, dbs):
            for var, dv in ((wv, dW), (bv, db)):
                vid = id(var)
                if vid in grads:
                    grads[vid] = grads[vid] + dv
        # contributions to leaves nobody asked for are dropped

    def reset(self):
        self._queued = False
        self.val_bar = None
        self.g_bar = {}
        self.h_bar = {}


class JetBatch:
    """Batched jet of one scalar field: tape Vars for value and derivatives."""

    def __init__(self, arity, val, grads, hess):
        self.arity = arity
        self.val = val
        self._g = grads                # list of Vars, length arity
        self._h = hess                 # dict (i, j) i<=j -> Var

    def d(self, i) -> Var:
        return self._g[i]

    def d2(self, i, j) -> Var:
        if i > j:
            i, j = j, i
        return self._h[(i, j)]

    @classmethod
    def from_constant(cls, arity, val, grad=None, hess=None):
        """Wrap precomputed (frozen-field) arrays as a constant jet."""
        n = np.asarray(val).shape[0]
        grads = [Var(grad[:, i]) if grad is not None else Var(np.zeros(n))
                 for i in range(arity)]
        hessd = {}
        for k, (i, j) in enumerate(sym_pairs(arity)):
            hessd[(i, j)] = Var(hess[:, k]) if hess is not None else Var(np.zeros(n))
        return cls(arity, Var(val), grads, hessd)


def net_jet(theta, X: np.ndarray) -> JetBatch:
    """Evaluate a network's jet batch as tape variables.

    `theta` is a list of (W_var, b_var) leaf pairs; X is a constant (N, arity)
    coordinate array.
    """
    w_vars = [w for w, _ in theta]
    b_vars = [b for _, b in theta]
    weights = [w.data for w in w_vars]
    biases = [b.data for b in b_vars]
    val, g, h, cache = jet_forward_raw(weights, biases, X)
    node = MlpJetNode(w_vars, b_vars, cache, weights)
    arity = X.shape[1]
    parents = tuple(w_vars) + tuple(b_vars)

    def make(data, slot):
        v = Var(data, parents=parents, vjp=None)
        v.parents = ()  # params reached via the node backward, not vjp
        v.node = node
        v.slot = slot
        return v

    val_v = make(val, ("val", None))
    g_vs = [make(g[:, d], ("g", d)) for d in range(arity)]
    h_vs = {}
    for k, (i, j) in enumerate(sym_pairs(arity)):
        h_vs[(i, j)] = make(h[:, k], ("h", k))
    return JetBatch(arity, val_v, g_vs, h_vs)
