"""Nested differentiation engine: forward second-order jets for input
derivatives, reverse accumulation for parameter gradients."""

from . import tape
from .jets import Jet2, JetBatch, jet_forward, net_jet, sym_pairs
from .tape import NonFiniteLossError, Var, backward

__all__ = [
    "tape", "Jet2", "JetBatch", "jet_forward", "net_jet", "sym_pairs",
    "NonFiniteLossError", "Var", "backward",
]
