"""Training drivers: collocation sampling, Adam, and the simultaneous and
sequential (fixed-stress / fixed-strain) strategies.

A problem object supplies collocation sets and residual terms; this module
owns the optimization loop, the stage bookkeeping of the sequential scheme,
and the frozen-snapshot semantics between stages.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .autodiff import tape
from .autodiff.jets import JetBatch, jet_forward_raw, sym_pairs
from .autodiff.tape import Var, backward
from .network import FieldBundle, forward_batch
from .weights import WeightState, gradnorm_update

log = logging.getLogger(__name__)

EDGE_NORMALS = {
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
    "bottom": (0.0, -1.0),
    "top": (0.0, 1.0),
}


# -- collocation -------------------------------------------------------------

@dataclass
class CollocationSet:
    interior: np.ndarray                  # (N, 3) rows (x, y, t)
    boundary: Dict[str, np.ndarray]       # edge name -> (N_e, 3)
    initial: np.ndarray                   # (N_0, 3) with t = 0
    seed: int

    def points(self, region: str) -> np.ndarray:
        if region == "interior":
            return self.interior
        if region == "initial":
            return self.initial
        return self.boundary[region]

    def normal(self, region: str):
        return np.asarray(EDGE_NORMALS[region])


def sample_collocation(box, counts, seed: int) -> CollocationSet:
    """Uniform i.i.d. samples over the dimensionless space-time box.

    box: ((x0, x1), (y0, y1), (t0, t1)); counts: (interior, per_edge, initial).
    Boundary sets are drawn per edge at the fixed coordinate; the initial set
    sits at t = t0.
    """
    n_int, n_edge, n_init = counts
    if min(n_int, n_edge, n_init) <= 0:
        raise ValueError("collocation counts must be positive")
    (x0, x1), (y0, y1), (t0, t1) = box
    rng = np.random.default_rng(seed)

    def draw(n, xs, ys, ts):
        pts = np.empty((n, 3))
        pts[:, 0] = rng.uniform(*xs, n)
        pts[:, 1] = rng.uniform(*ys, n)
        pts[:, 2] = rng.uniform(*ts, n)
        return pts

    interior = draw(n_int, (x0, x1), (y0, y1), (t0, t1))
    boundary = {
        "left": draw(n_edge, (x0, x0), (y0, y1), (t0, t1)),
        "right": draw(n_edge, (x1, x1), (y0, y1), (t0, t1)),
        "bottom": draw(n_edge, (x0, x1), (y0, y0), (t0, t1)),
        "top": draw(n_edge, (x0, x1), (y1, y1), (t0, t1)),
    }
    initial = draw(n_init, (x0, x1), (y0, y1), (t0, t0))
    return CollocationSet(interior=interior, boundary=boundary,
                          initial=initial, seed=seed)


# -- configuration and state -------------------------------------------------

@dataclass
class TrainConfig:
    epochs_per_stage: int = 2000
    max_sequential_iters: int = 10
    tol: float = 1e-3
    lr_initial: float = 1e-3
    lr_final: float = 1e-5
    weight_scheme: str = "gradnorm"       # gradnorm | uniform
    split_mode: str = "stress"            # simultaneous | stress | strain
    seed: int = 0
    alpha: float = 1.0
    beta: float = 0.1
    update_period: int = 10
    reset_moments: bool = True

    def __post_init__(self):
        if not self.lr_initial >= self.lr_final > 0:
            raise ValueError("need lr_initial >= lr_final > 0")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.epochs_per_stage < 1 or self.max_sequential_iters < 1:
            raise ValueError("epoch and iteration counts must be >= 1")
        if self.split_mode not in ("simultaneous", "stress", "strain"):
            raise ValueError(f"unknown split mode: {self.split_mode!r}")
        if self.weight_scheme not in ("gradnorm", "uniform"):
            raise ValueError(f"unknown weight scheme: {self.weight_scheme!r}")
        if self.update_period < 1:
            raise ValueError("update_period must be >= 1")


@dataclass
class TrainingState:
    bundle: FieldBundle
    history: List[dict] = field(default_factory=list)   # one row per epoch
    err_history: List[float] = field(default_factory=list)
    iterations: int = 0
    epochs_run: int = 0
    diverged: bool = False
    diverged_stage: Optional[str] = None
    diverged_iteration: Optional[int] = None
    converged: bool = False


# -- Adam --------------------------------------------------------------------

@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0

    @classmethod
    def for_arrays(cls, arrays):
        return cls(m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays])


def adam_step(arrays, grads, state: AdamState, lr,
              beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, applied to `arrays` in place."""
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient in Adam step")
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        a -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def lr_schedule(epoch, total_epochs, lr_initial, lr_final):
    """Exponential decay from lr_initial to lr_final over the stage."""
    if total_epochs <= 0:
        return lr_initial
    frac = epoch / total_epochs
    return lr_initial * (lr_final / lr_initial) ** frac


# -- evaluation context ------------------------------------------------------

def _constant_jets(bundle: Optional[FieldBundle], colloc: CollocationSet):
    """Lazily evaluated jets of a frozen parameter snapshot (or zero fields
    when no snapshot exists yet)."""
    cache = {}

    def get(region, name):
        key = (region, name)
        if key not in cache:
            pts = colloc.points(region)
            if bundle is None:
                cache[key] = JetBatch.from_constant(3, np.zeros(len(pts)))
            else:
                params = bundle[name]
                val, g, h, _ = jet_forward_raw(params.weights, params.biases,
                                               pts)
                cache[key] = JetBatch.from_constant(3, val, g, h)
        return cache[key]

    return get


class EvalContext:
    """What a residual evaluator sees: live jets for the fields being trained
    this stage, frozen-snapshot jets for everything else."""

    def __init__(self, colloc, theta, frozen_get):
        self.colloc = colloc
        self._theta = theta          # field name -> list of (W_var, b_var)
        self._frozen_get = frozen_get
        self._live = {}

    def points(self, region):
        return self.colloc.points(region)

    def normal(self, region):
        return self.colloc.normal(region)

    def is_live(self, name):
        return name in self._theta

    def field(self, region, name) -> JetBatch:
        """Live jet when the field is being trained, frozen jet otherwise."""
        if name in self._theta:
            key = (region, name)
            if key not in self._live:
                from .autodiff.jets import net_jet
                self._live[key] = net_jet(self._theta[name],
                                          self.colloc.points(region))
            return self._live[key]
        return self._frozen_get(region, name)

    def frozen_field(self, region, name) -> JetBatch:
        """Always the snapshot (zero before the first sequential stage)."""
        return self._frozen_get(region, name)


def _make_leaves(bundle: FieldBundle, live_fields):
    theta, leaves, arrays = {}, [], []
    for name in live_fields:
        params = bundle[name]
        pairs = []
        for W, b in zip(params.weights, params.biases):
            wv, bv = Var(W), Var(b)
            pairs.append((wv, bv))
            leaves.extend((wv, bv))
            arrays.extend((W, b))
        theta[name] = pairs
    return theta, leaves, arrays


# -- stage loop --------------------------------------------------------------

def _grad_list(gmap, leaves):
    return [gmap[id(v)] for v in leaves]


def train_stage(problem, bundle, live_fields, terms, frozen_bundle, config,
                state: TrainingState, stage_name, iteration,
                wstate: WeightState = None) -> WeightState:
    """Run one Adam stage; returns None on divergence.

    Only `live_fields` parameters are updated; frozen evaluations come from
    `frozen_bundle` (None means identically-zero fields, the sequential
    scheme's starting coupling).  A `wstate` carried over from an earlier
    invocation of the same stage continues its weighting trajectory (the
    sequential scheme revisits each stage's loss repeatedly; resetting the
    weights every pass would erase the training-progress signal the scores
    are built on).  Returns the final weight state.
    """
    colloc = problem.colloc
    frozen_get = _constant_jets(frozen_bundle, colloc)
    arrays0 = None
    adam = None
    if wstate is None:
        wstate = WeightState.uniform(len(terms), alpha=config.alpha,
                                     beta=config.beta,
                                     update_period=config.update_period)
    epochs = config.epochs_per_stage
    use_gradnorm = config.weight_scheme == "gradnorm" and len(terms) > 1

    for epoch in range(epochs):
        theta, leaves, arrays = _make_leaves(bundle, live_fields)
        if adam is None:
            adam = AdamState.for_arrays(arrays)
            arrays0 = arrays
        ctx = EvalContext(colloc, theta, frozen_get)
        losses = [tape.mean_sq(t.evaluator(ctx)) for t in terms]
        loss_vals = np.array([float(l.data) for l in losses])
        if not np.all(np.isfinite(loss_vals)):
            bad = terms[int(np.argmin(np.isfinite(loss_vals)))].name
            log.error("non-finite loss in term %s (stage %s, iter %s, "
                      "epoch %d)", bad, stage_name, iteration, epoch)
            state.diverged = True
            state.diverged_stage = stage_name
            state.diverged_iteration = iteration
            return None
        if wstate.initial_losses is None:
            wstate.capture_initial(loss_vals)
        lam = wstate.lambdas
        total_val = float(np.dot(lam, loss_vals))

        do_update = (use_gradnorm and epoch > 0
                     and epoch % wstate.update_period == 0)
        if do_update:
            # per-term backward passes give the gradient norms GradNorm
            # needs; their weighted sum is the full gradient.
            grads = [np.zeros_like(a) for a in arrays]
            G = np.empty(len(terms))
            for i, l in enumerate(losses):
                gmap = backward(l, leaves)
                gl = _grad_list(gmap, leaves)
                sq = 0.0
                for j, g in enumerate(gl):
                    grads[j] += lam[i] * g
                    sq += float(np.sum(g * g))
                G[i] = lam[i] * np.sqrt(sq)
            wstate = gradnorm_update(wstate, G, loss_vals)
        else:
            total = losses[0] * lam[0]
            for i in range(1, len(terms)):
                total = total + losses[i] * lam[i]
            gmap = backward(total, leaves)
            grads = _grad_list(gmap, leaves)

        lr = lr_schedule(epoch, epochs, config.lr_initial, config.lr_final)
        try:
            adam_step(arrays, grads, adam, lr)
        except FloatingPointError:
            log.error("non-finite gradient (stage %s, iter %s, epoch %d)",
                      stage_name, iteration, epoch)
            state.diverged = True
            state.diverged_stage = stage_name
            state.diverged_iteration = iteration
            return None

        row = {"epoch": state.epochs_run, "stage": stage_name,
               "iteration": iteration if iteration is not None else 0,
               "lr": lr, "total": total_val}
        for t, lv, lm in zip(terms, loss_vals, lam):
            row[f"loss:{t.name}"] = float(lv)
            row[f"lambda:{t.name}"] = float(lm)
        state.history.append(row)
        state.epochs_run += 1
    return wstate


# -- strategies --------------------------------------------------------------

def _flat_params(bundle: FieldBundle):
    chunks = []
    for name in bundle.names():
        p = bundle[name]
        for W, b in zip(p.weights, p.biases):
            chunks.append(W.ravel())
            chunks.append(b.ravel())
    return np.concatenate(chunks)


def relative_param_change(bundle, prev_flat):
    cur = _flat_params(bundle)
    denom = np.linalg.norm(cur)
    if denom == 0.0:
        return 0.0 if np.linalg.norm(prev_flat) == 0.0 else np.inf
    return float(np.linalg.norm(cur - prev_flat) / denom)


def train_simultaneous(problem, config: TrainConfig) -> TrainingState:
    """All fields and all loss terms trained together in one stage."""
    bundle = problem.bundle
    terms = problem.loss_terms("simultaneous")
    state = TrainingState(bundle=bundle)
    train_stage(problem, bundle, list(bundle.names()), terms, None, config,
                state, "simultaneous", None)
    state.converged = not state.diverged
    return state


def train_sequential(problem, config: TrainConfig,
                     split_mode: Optional[str] = None) -> TrainingState:
    """Staggered flow/mechanics training with frozen cross-coupling.

    Each outer iteration trains the flow networks against the previous
    volumetric coupling snapshot, snapshots the pressure, then trains the
    mechanics networks against it.  Stops when the relative change of the
    concatenated parameter vector drops below tol.
    """
    split = split_mode or config.split_mode
    if split not in ("stress", "strain"):
        raise ValueError(f"sequential split must be stress|strain, got {split}")
    bundle = problem.bundle
    terms = problem.loss_terms(split)
    flow_terms = [t for t in terms if t.stage == "flow"]
    mech_terms = [t for t in terms if t.stage == "mech"]
    state = TrainingState(bundle=bundle)

    snapshot = None          # coupling starts identically zero
    flow_wstate = mech_wstate = None
    prev_flat = _flat_params(bundle)
    for n in range(1, config.max_sequential_iters + 1):
        flow_wstate = train_stage(problem, bundle, list(problem.flow_fields),
                                  flow_terms, snapshot, config, state,
                                  "flow", n, flow_wstate)
        if flow_wstate is None:
            return state
        flow_snapshot = bundle.copy()    # frozen pressure for mechanics
        mech_wstate = train_stage(problem, bundle, list(problem.mech_fields),
                                  mech_terms, flow_snapshot, config, state,
                                  "mech", n, mech_wstate)
        if mech_wstate is None:
            return state
        snapshot = bundle.copy()         # coupling for the next iteration
        err = relative_param_change(bundle, prev_flat)
        prev_flat = _flat_params(bundle)
        state.err_history.append(err)
        state.iterations = n
        log.info("sequential iteration %d: err = %.3e", n, err)
        if err <= config.tol:
            state.converged = True
            break
    return state


# -- evaluation helpers ------------------------------------------------------

def evaluate_fields(bundle: FieldBundle, pts, fields=None):
    names = fields if fields is not None else bundle.names()
    return {name: forward_batch(bundle[name], pts) for name in names}


def relative_l2(pred, ref):
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    denom = np.linalg.norm(ref)
    diff = np.linalg.norm(pred - ref)
    return float(diff / denom) if denom > 0 else float(diff)


def error_metrics(pred: dict, ref: dict) -> dict:
    """Relative L2 and max-abs error per field over matched sample arrays."""
    out = {}
    for name, r in ref.items():
        p = np.asarray(pred[name])
        out[name] = {
            "rel_l2": relative_l2(p, r),
            "max_abs": float(np.max(np.abs(p - np.asarray(r)))),
        }
    return out


# -- training log ------------------------------------------------------------

def write_training_log(path, history):
    """CSV with a stable column order: bookkeeping first, then each loss and
    weight column in first-appearance order."""
    fixed = ["epoch", "stage", "iteration", "lr", "total"]
    extra = []
    for row in history:
        for key in row:
            if key not in fixed and key not in extra:
                extra.append(key)
    cols = fixed + extra
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in history:
            w.writerow([_fmt(row.get(c, "")) for c in cols])


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x
