"""Feed-forward field networks: tanh hidden layers, linear scalar output.

One network per solution variable; all networks of a bundle share the input
arity (x, y, t) but have independent parameters. Initialization follows the
Glorot uniform scheme with zero biases, using numpy's seedable PCG64 generator
so runs reproduce bit-for-bit across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1

SINGLE_PHASE_FIELDS = ("u_x", "u_y", "p", "eps_v")
TWO_PHASE_FIELDS = ("u_x", "u_y", "p_c", "p_w", "eps_v")


@dataclass
class MlpParams:
    """Per-layer weight matrices (O_i, I_i) and bias vectors (O_i,)."""

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MlpParams":
        return MlpParams(list(self.layer_sizes),
                         [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    @property
    def input_arity(self) -> int:
        return self.layer_sizes[0]


def _check_sizes(layer_sizes):
    if len(layer_sizes) < 2:
        raise ValueError("layer_sizes needs at least input and output entries")
    if any(int(s) <= 0 for s in layer_sizes):
        raise ValueError(f"layer_sizes must be positive, got {layer_sizes}")


def init_glorot(layer_sizes, seed: int) -> MlpParams:
    """Glorot-uniform weights, zero biases, reproducible for a fixed seed."""
    _check_sizes(layer_sizes)
    sizes = [int(s) for s in layer_sizes]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(sizes, weights, biases)


def param_count(params: MlpParams) -> int:
    return sum(w.size + b.size for w, b in zip(params.weights, params.biases))


def forward_batch(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Plain forward pass over an (N, arity) batch; bit-identical to the jet
    evaluation's value component (same operation order)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != params.input_arity:
        raise ValueError(
            f"input arity {X.shape[1]} != network arity {params.input_arity}")
    val = X
    last = len(params.weights) - 1
    for li, (W, b) in enumerate(zip(params.weights, params.biases)):
        val = val @ W.T + b
        if li < last:
            val = np.tanh(val)
    return val[:, 0]


def forward(params: MlpParams, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_arity,):
        raise ValueError(
            f"input has shape {x.shape}, network expects ({params.input_arity},)")
    return float(forward_batch(params, x[None, :])[0])


@dataclass
class FieldBundle:
    """Named map variable -> network for one problem class."""

    nets: dict[str, MlpParams] = field(default_factory=dict)

    @classmethod
    def create(cls, fields, layer_sizes, seed: int) -> "FieldBundle":
        """One independently initialized network per variable; the seed is
        offset per field so networks are not clones of each other."""
        nets = {}
        for i, name in enumerate(fields):
            nets[name] = init_glorot(layer_sizes, seed + 1000 * i)
        return cls(nets)

    @classmethod
    def single_phase(cls, layer_sizes, seed: int) -> "FieldBundle":
        return cls.create(SINGLE_PHASE_FIELDS, layer_sizes, seed)

    @classmethod
    def two_phase(cls, layer_sizes, seed: int) -> "FieldBundle":
        return cls.create(TWO_PHASE_FIELDS, layer_sizes, seed)

    def copy(self) -> "FieldBundle":
        return FieldBundle({k: v.copy() for k, v in self.nets.items()})

    def __getitem__(self, name) -> MlpParams:
        return self.nets[name]

    def names(self):
        return tuple(self.nets)


def save_checkpoint(bundle: FieldBundle, path, seed: int, epoch: int):
    """Versioned npz checkpoint: header JSON + flat parameter arrays."""
    header = {
        "version": CHECKPOINT_VERSION,
        "seed": int(seed),
        "epoch": int(epoch),
        "fields": {name: net.layer_sizes for name, net in bundle.nets.items()},
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    for name, net in bundle.nets.items():
        for li, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"{name}__W{li}"] = w
            arrays[f"{name}__b{li}"] = b
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Returns (FieldBundle, header dict)."""
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        nets = {}
        for name, sizes in header["fields"].items():
            weights = [data[f"{name}__W{li}"] for li in range(len(sizes) - 1)]
            biases = [data[f"{name}__b{li}"] for li in range(len(sizes) - 1)]
            nets[name] = MlpParams([int(s) for s in sizes], weights, biases)
    return FieldBundle(nets), header
