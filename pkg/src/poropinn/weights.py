"""Adaptive loss-term weighting.

Scored gradient-norm balancing: each term's weight is nudged toward the
value that equalizes weighted gradient norms, scaled by how little the term
has trained relative to the others, with an Euler relaxation step.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class WeightState:
    lambdas: np.ndarray
    initial_losses: np.ndarray = None
    alpha: float = 1.0
    beta: float = 0.1
    update_period: int = 10
    pinned: np.ndarray = field(default=None, repr=False)  # zero-initial-loss terms

    @classmethod
    def uniform(cls, n_terms, alpha=1.0, beta=0.1, update_period=10):
        return cls(lambdas=np.ones(n_terms), alpha=alpha, beta=beta,
                   update_period=update_period)

    def capture_initial(self, losses, rel_floor=1e-4):
        """Record L_i(0) once, at the first epoch; never overwritten.

        Dividing by a vanishing L_i(0) would let a single term dominate every
        score, so degenerate captures are repaired: a term whose initial loss
        is tiny next to the largest (e.g. a BC the zero-output initial network
        satisfies trivially) has its L_i(0) floored to the mean of the healthy
        terms — if its loss later grows, its score rises like any other
        under-trained term's.  Exactly-zero initial losses are pinned to
        score 1.
        """
        if self.initial_losses is not None:
            return
        losses = np.asarray(losses, dtype=np.float64)
        self.pinned = losses <= 0.0
        if np.any(self.pinned):
            log.warning("zero initial loss for %d term(s); scores pinned to 1",
                        int(np.count_nonzero(self.pinned)))
        tiny = losses <= rel_floor * np.max(losses, initial=0.0)
        healthy = losses[~tiny]
        floor = float(np.mean(healthy)) if healthy.size else 1.0
        if np.any(tiny & ~self.pinned):
            log.warning("near-zero initial loss for %d term(s); floored to "
                        "the healthy-term mean %.3e",
                        int(np.count_nonzero(tiny & ~self.pinned)), floor)
        safe = losses.copy()
        safe[tiny] = floor
        safe[self.pinned] = 1.0  # unused: scores() pins these terms to 1
        self.initial_losses = safe


def scores(losses, initial_losses, pinned=None):
    """Relative-training scores s_i = (L_i/L_i(0)) / mean_j(L_j/L_j(0))."""
    losses = np.asarray(losses, dtype=np.float64)
    initial = np.asarray(initial_losses, dtype=np.float64)
    rel = losses / initial
    if pinned is not None and np.any(pinned):
        rel = np.where(pinned, 1.0, rel)
    m = np.mean(rel)
    if m <= 0.0:
        return np.ones_like(rel)
    return rel / m


def gradnorm_update(state: WeightState, grad_norms, losses) -> WeightState:
    """One weighting update.

    grad_norms are the L2 norms of each weighted term's parameter gradient
    (gradient of lambda_i * L_i).  The target weight rebalances them to
    mean(G) * s_i**alpha; the Euler step moves a fraction beta of the way.
    Terms with zero gradient keep their weight; non-finite gradients abort
    the update.
    """
    G = np.asarray(grad_norms, dtype=np.float64)
    if not np.all(np.isfinite(G)):
        log.warning("non-finite gradient norms %s; keeping previous weights", G)
        return state
    if state.initial_losses is None:
        raise RuntimeError("capture_initial must run before the first update")
    s = scores(losses, state.initial_losses, state.pinned)
    lam = state.lambdas
    active = G > 0.0
    lam_hat = lam.copy()
    if np.any(active):
        mean_G = np.mean(G[active])
        lam_hat[active] = (lam[active] * (mean_G / G[active])
                          * s[active] ** state.alpha)
    new_lam = (1.0 - state.beta) * lam + state.beta * lam_hat
    if not (np.all(np.isfinite(new_lam)) and np.all(new_lam > 0.0)):
        log.warning("degenerate weight update %s; keeping previous weights",
                    new_lam)
        return state
    return WeightState(lambdas=new_lam, initial_losses=state.initial_losses,
                       alpha=state.alpha, beta=state.beta,
                       update_period=state.update_period, pinned=state.pinned)
