"""Command-line entry point: benchmark registry, config loading, run
orchestration, and CSV/JSON artifact emission.

Subcommands: run, oracle, check, info.  Benchmarks are selected by name; a
YAML config can override physics, network, collocation, and training knobs.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np
import yaml

from . import __version__, oracle, problems, train
from .network import param_count, save_checkpoint
from .nondim import derive_single_phase, derive_two_phase
from .residuals import constitutive_state
from .train import TrainConfig, error_metrics, evaluate_fields, relative_l2

log = logging.getLogger("poropinn")

BENCHMARKS = ("mandel", "barry_mercer", "drainage")

PROFILES = {
    "paper": {"layers": [3, 100, 100, 100, 100, 1],
              "counts": (10000, 1000, 1000), "epochs_per_stage": 10000},
    "desk": {"layers": [3, 32, 32, 1],
             "counts": (1000, 100, 100), "epochs_per_stage": 600,
             "max_sequential_iters": 14, "lr_initial": 1e-2,
             "lr_final": 1e-4},
    "smoke": {"layers": [3, 8, 8, 1],
              "counts": (100, 20, 20), "epochs_per_stage": 25,
              "max_sequential_iters": 2},
}

_TRAIN_KEYS = {"split", "weights", "seed", "epochs_per_stage",
               "max_sequential_iters", "tol", "lr_initial", "lr_final",
               "alpha", "beta", "update_period"}
_PHYSICS_KEYS = {
    "mandel": {"E", "nu", "b", "M", "k", "mu", "sigma0", "dstar"},
    "barry_mercer": {"E", "nu", "k", "mu", "p_star"},
    "drainage": {"E", "nu", "b", "phi", "K_s", "c_w", "c_n", "k", "mu_w",
                 "mu_n", "rho_s", "rho_w", "rho_n", "g"},
}


class ConfigError(ValueError):
    pass


def load_config(path):
    """Parse and validate a benchmark config; unknown keys are an error."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    allowed = {"benchmark", "profile", "train", "network", "collocation",
               "physics"}
    _reject_unknown(raw, allowed, "top level")
    name = raw.get("benchmark")
    if name not in BENCHMARKS:
        raise ConfigError(f"unknown benchmark name: {name!r} "
                          f"(expected one of {', '.join(BENCHMARKS)})")
    profile = raw.get("profile", "desk")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile: {profile!r}")
    tr = raw.get("train", {}) or {}
    _reject_unknown(tr, _TRAIN_KEYS, "train")
    net = raw.get("network", {}) or {}
    _reject_unknown(net, {"layers"}, "network")
    col = raw.get("collocation", {}) or {}
    _reject_unknown(col, {"interior", "per_edge", "initial"}, "collocation")
    phy = raw.get("physics", {}) or {}
    _reject_unknown(phy, _PHYSICS_KEYS[name], f"physics ({name})")
    _check_physics_ranges(phy)
    return {"benchmark": name, "profile": profile, "train": tr,
            "network": net, "collocation": col, "physics": phy}


def _reject_unknown(mapping, allowed, where):
    unknown = set(mapping) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: "
                          f"{', '.join(sorted(unknown))}")


def _check_physics_ranges(phy):
    if "nu" in phy and not 0.0 < phy["nu"] < 0.5:
        raise ConfigError(f"physics.nu out of range (0, 0.5): {phy['nu']}")
    if "b" in phy and not 0.0 < phy["b"] <= 1.0:
        raise ConfigError(f"physics.b out of range (0, 1]: {phy['b']}")
    if "dstar" in phy and not 0.0 < phy["dstar"] < 1.0:
        raise ConfigError(f"physics.dstar out of range (0, 1): {phy['dstar']}")
    for key in ("E", "M", "k", "mu", "mu_w", "mu_n", "phi", "K_s"):
        if key in phy and not phy[key] > 0.0:
            raise ConfigError(f"physics.{key} must be positive: {phy[key]}")


def build_problem(name, profile="desk", cfg=None, seed=None, epochs=None,
                  dstar=None):
    """Materialize a benchmark problem and training config from settings."""
    cfg = cfg or {}
    prof = dict(PROFILES[profile])
    layers = cfg.get("network", {}).get("layers", prof["layers"])
    counts = tuple(cfg.get("collocation", {}).get(k, prof["counts"][i])
                   for i, k in enumerate(("interior", "per_edge", "initial")))
    tr = dict(cfg.get("train", {}))
    phy = dict(cfg.get("physics", {}))
    if seed is not None:
        tr["seed"] = seed
    if epochs is not None:
        tr["epochs_per_stage"] = epochs
    for key in ("epochs_per_stage", "max_sequential_iters", "lr_initial",
                "lr_final"):
        if key in prof:
            tr.setdefault(key, prof[key])
    split = tr.pop("split", "stress")
    weights = tr.pop("weights", "gradnorm")
    config = TrainConfig(weight_scheme=weights, split_mode=split, **tr)

    if name == "mandel":
        if dstar is not None:
            phy["dstar"] = dstar
        if "dstar" in phy:
            phy["M"] = problems.m_for_dstar(
                phy.pop("dstar"), E=phy.get("E", 120e6),
                nu=phy.get("nu", 0.25), b=phy.get("b", 1.0))
        base = problems.mandel_physical()
        phys = _override(base, phy)
        problem = problems.mandel_problem(layers, counts, config.seed,
                                          phys=phys)
    elif name == "barry_mercer":
        base = problems.barry_mercer_physical()
        phys = _override(base, phy)
        problem = problems.barry_mercer_problem(layers, counts, config.seed,
                                                phys=phys)
    elif name == "drainage":
        base = problems.drainage_physical()
        phys = _override(base, phy)
        problem = problems.drainage_problem(layers, counts, config.seed,
                                            phys=phys)
    else:
        raise ConfigError(f"unknown benchmark name: {name!r}")
    return problem, config, {"layers": layers, "counts": counts,
                             "profile": profile}


def _override(base, updates):
    import dataclasses
    return dataclasses.replace(base, **updates) if updates else base


# -- artifact emission -------------------------------------------------------

def _out_dir(args, name):
    out = args.out or os.environ.get("POROPINN_OUT") or os.path.join("runs",
                                                                     name)
    os.makedirs(out, exist_ok=True)
    return out


def _grid_points(box, n, t_bar):
    (x0, x1), (y0, y1), _ = box
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(),
                           np.full(gx.size, t_bar)])
    return pts


def _write_fields_csv(path, rows, field_names):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "t"] + list(field_names))
        for pts, vals in rows:
            for i in range(len(pts)):
                w.writerow([repr(float(pts[i, 0])), repr(float(pts[i, 1])),
                            repr(float(pts[i, 2]))]
                           + [repr(float(vals[n][i])) for n in field_names])


def _sample_times(problem):
    _, _, (t0, t1) = problem.box
    return np.linspace(t0 + 0.1 * (t1 - t0), t1, 4)


def _reference_for(problem, pts):
    if problem.name == "mandel":
        m = problem.meta
        return problems.mandel_reference(m["phys"], m["dimless"],
                                         m["derived"], pts)
    if problem.name == "barry_mercer":
        return problems.barry_mercer_reference(problem.meta, pts)
    return None


def _bm_mask(pts):
    """Exclude the smoothed-source disc from Barry-Mercer error norms."""
    r = np.hypot(pts[:, 0] - 0.25, pts[:, 1] - 0.25)
    return r > 3.0 * problems.GAUSS_ALPHA


def compute_errors(problem, grid_n=41, times=None):
    """Per-time relative L2 errors against the benchmark's oracle, if any."""
    if problem.name == "drainage":
        return None
    times = times if times is not None else _sample_times(problem)
    out = []
    for t_bar in times:
        pts = _grid_points(problem.box, grid_n, t_bar)
        ref = _reference_for(problem, pts)
        pred = evaluate_fields(problem.bundle, pts,
                               fields=("u_x", "u_y", "p"))
        if problem.name == "barry_mercer":
            mask = _bm_mask(pts)
            ref = {k: v[mask] for k, v in ref.items()}
            pred = {k: v[mask] for k, v in pred.items()}
        m = error_metrics(pred, ref)
        m["t"] = float(t_bar)
        out.append(m)
    return out


def _write_errors_csv(path, errors):
    fields = [k for k in errors[0] if k != "t"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{f}_rel_l2" for f in fields]
                   + [f"{f}_max_abs" for f in fields])
        for row in errors:
            w.writerow([repr(row["t"])]
                       + [repr(row[f]["rel_l2"]) for f in fields]
                       + [repr(row[f]["max_abs"]) for f in fields])


def run_benchmark(args):
    cfg = load_config(args.config) if args.config else None
    name = args.benchmark or (cfg and cfg["benchmark"])
    if name is None:
        raise ConfigError("no benchmark given (use --benchmark or --config)")
    name = name.replace("-", "_")
    profile = args.profile or (cfg["profile"] if cfg else "desk")
    problem, config, info = build_problem(
        name, profile, cfg, seed=args.seed, epochs=args.epochs,
        dstar=args.dstar)
    if args.split:
        config.split_mode = args.split
    if args.weights:
        config.weight_scheme = args.weights
    out = _out_dir(args, name)
    log.info("running %s (profile %s, split %s, weights %s, seed %d)",
             name, profile, config.split_mode, config.weight_scheme,
             config.seed)
    echo = {"benchmark": name, "profile": profile, "layers": info["layers"],
            "counts": list(info["counts"]), "split": config.split_mode,
            "weights": config.weight_scheme, "seed": config.seed,
            "epochs_per_stage": config.epochs_per_stage,
            "max_sequential_iters": config.max_sequential_iters,
            "tol": config.tol, "lr_initial": config.lr_initial,
            "lr_final": config.lr_final, "alpha": config.alpha,
            "beta": config.beta, "update_period": config.update_period,
            "version": __version__}
    t0 = time.time()
    if config.split_mode == "simultaneous":
        state = train.train_simultaneous(problem, config)
    else:
        state = train.train_sequential(problem, config)
    wall = time.time() - t0

    train.write_training_log(os.path.join(out, "training_log.csv"),
                             state.history)
    field_rows = []
    names = list(problem.bundle.names())
    for t_bar in _sample_times(problem):
        pts = _grid_points(problem.box, 41, t_bar)
        field_rows.append((pts, evaluate_fields(problem.bundle, pts)))
    _write_fields_csv(os.path.join(out, "fields.csv"), field_rows, names)
    errors = compute_errors(problem)
    if errors:
        _write_errors_csv(os.path.join(out, "errors.csv"), errors)
    save_checkpoint(problem.bundle, os.path.join(out, "checkpoint.npz"),
                    seed=config.seed, epoch=state.epochs_run)

    summary = {
        "config": echo,
        "wall_time_s": wall,
        "epochs_run": state.epochs_run,
        "iterations": state.iterations,
        "err_history": state.err_history,
        "converged": state.converged,
        "diverged": state.diverged,
        "diverged_stage": state.diverged_stage,
        "diverged_iteration": state.diverged_iteration,
        "final_total_loss": state.history[-1]["total"] if state.history
        else None,
    }
    if errors:
        summary["errors"] = [
            {k: (v if k == "t" else v["rel_l2"]) for k, v in row.items()}
            for row in errors]
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"{name}: epochs={state.epochs_run} "
          f"converged={state.converged} diverged={state.diverged} "
          f"out={out}")
    if state.diverged:
        return 2
    if config.split_mode != "simultaneous" and not state.converged:
        log.warning("sequential iteration did not reach tol=%g", config.tol)
        return 3
    return 0


def run_oracle(args):
    name = (args.benchmark or "mandel").replace("-", "_")
    out = _out_dir(args, name)
    n = args.grid
    times = _parse_times(args.times)
    if name == "mandel":
        phys = problems.mandel_physical()
        dimless = derive_single_phase(phys)
        derived = oracle.mandel_derived(phys)
        rows = []
        for t_bar in times:
            pts = _grid_points(((0, 1), (0, 1), (0, 1)), n, t_bar)
            rows.append((pts, problems.mandel_reference(phys, dimless,
                                                        derived, pts)))
        path = os.path.join(out, "oracle.csv")
        _write_fields_csv(path, rows, ("p", "u_x", "u_y"))
    elif name == "barry_mercer":
        phys = problems.barry_mercer_physical()
        dimless = derive_single_phase(phys)
        beta = oracle.barry_mercer_beta(phys.E, phys.nu, phys.k, phys.mu)
        cfg = oracle.BarryMercerConfig(beta=beta, n_modes=args.modes,
                                       q_modes=args.modes)
        rows = []
        for t_hat in times:
            pts = _grid_points(((0, 1), (0, 1), (0, 1)), n, 0.0)
            p, u, v = oracle.barry_mercer_solution(
                pts[:, 0], pts[:, 1], t_hat, cfg, (phys.E, phys.nu))
            pts = pts.copy()
            pts[:, 2] = t_hat / (beta * dimless.t_star)
            rows.append((pts, {"p": p / phys.p_star,
                               "u_x": u / dimless.u_star,
                               "u_y": v / dimless.u_star}))
        path = os.path.join(out, "oracle.csv")
        _write_fields_csv(path, rows, ("p", "u_x", "u_y"))
    else:
        raise ConfigError("no closed-form oracle for the drainage benchmark")
    print(f"wrote {path}")
    return 0


def _parse_times(spec):
    out = []
    for tok in spec.split(","):
        tok = tok.strip().replace("π", "pi")
        if "pi" in tok:
            factor = tok.replace("pi", "").replace("*", "").strip()
            out.append((float(factor) if factor else 1.0) * np.pi)
        else:
            out.append(float(tok))
    return out


def run_check(args):
    """Fast invariant suite over oracles and dimensionless derivations."""
    failures = []

    def check(label, ok):
        print(f"  [{'ok' if ok else 'FAIL'}] {label}")
        if not ok:
            failures.append(label)

    phys = problems.mandel_physical()
    dimless = derive_single_phase(phys)
    derived = oracle.mandel_derived(phys)
    check("mandel D* = 0.9375", abs(dimless.D_star - 0.9375) < 1e-12)
    res = oracle.mandel_root_residuals(phys.nu, derived.nu_u, derived.roots)
    check("mandel root residuals <= 1e-12", float(np.max(res)) <= 1e-12)
    y = np.linspace(0, 1, 7)
    p_top, _, _ = oracle.mandel_solution(0.3, 1.0, 0.25 * dimless.t_star,
                                         phys, derived)
    check("mandel p(top) = 0", float(np.max(np.abs(p_top))) < 1e-12 * phys.p_star)

    bphys = problems.barry_mercer_physical()
    bdim = derive_single_phase(bphys)
    check("barry-mercer D* = 1.0", bdim.D_star == 1.0)
    beta = oracle.barry_mercer_beta(bphys.E, bphys.nu, bphys.k, bphys.mu)
    cfg = oracle.BarryMercerConfig(beta=beta, n_modes=64, q_modes=64)
    p0, u0, v0 = oracle.barry_mercer_solution(y, y, 0.0, cfg,
                                              (bphys.E, bphys.nu))
    check("barry-mercer zero at t=0",
          max(np.abs(p0).max(), np.abs(u0).max(), np.abs(v0).max()) == 0.0)

    dphys = problems.drainage_physical()
    ddim = derive_two_phase(dphys, 1.0)
    check("drainage gravity number normalizes",
          abs((dphys.rho_w / dphys.rho) * ddim.N_d - 1.0) < 1e-12)
    print("check:", "PASS" if not failures else f"FAIL ({len(failures)})")
    return 0 if not failures else 1


def run_info(args):
    name = (args.benchmark or "mandel").replace("-", "_")
    if name == "mandel":
        phys = problems.mandel_physical()
        if args.dstar:
            import dataclasses
            phys = dataclasses.replace(phys,
                                       M=problems.m_for_dstar(args.dstar))
        dl = derive_single_phase(phys)
        info = {"benchmark": name, "D_star": dl.D_star, "nu_star": dl.nu_star,
                "t_star_s": dl.t_star, "u_star_m": dl.u_star,
                "N_d": dl.N_d, "K_dr_Pa": dl.K_dr, "p_star_Pa": phys.p_star}
    elif name == "barry_mercer":
        phys = problems.barry_mercer_physical()
        dl = derive_single_phase(phys)
        beta = oracle.barry_mercer_beta(phys.E, phys.nu, phys.k, phys.mu)
        info = {"benchmark": name, "D_star": dl.D_star, "nu_star": dl.nu_star,
                "t_star_s": dl.t_star, "u_star_m": dl.u_star,
                "beta_per_s": beta,
                "t_bar_period": 2 * np.pi / (beta * dl.t_star)}
    else:
        phys = problems.drainage_physical()
        dl = derive_two_phase(phys, 1.0)
        info = {"benchmark": name, "M_bar_star_Pa": dl.M_bar_star,
                "t_star_s": dl.t_star, "nu_star": dl.nu_star,
                "N_d": dl.N_d, "u_star_m": dl.u_star,
                "p_star_Pa": phys.p_star,
                "D_w_star": dl.D_w_star, "D_n_star": dl.D_n_star}
    for k, v in info.items():
        print(f"{k}: {v}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="poropinn",
        description="Physics-informed solver for coupled poroelasticity")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train a benchmark")
    p_run.add_argument("--benchmark", choices=[b.replace("_", "-")
                                               for b in BENCHMARKS]
                       + list(BENCHMARKS))
    p_run.add_argument("--config")
    p_run.add_argument("--profile", choices=sorted(PROFILES))
    p_run.add_argument("--split",
                       choices=["simultaneous", "stress", "strain"])
    p_run.add_argument("--weights", choices=["gradnorm", "uniform"])
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--epochs", type=int)
    p_run.add_argument("--out")
    p_run.add_argument("--dstar", type=float,
                       help="target coupling strength (mandel only)")
    p_run.set_defaults(func=run_benchmark)

    p_or = sub.add_parser("oracle", help="sample an analytical solution")
    p_or.add_argument("--benchmark", choices=["mandel", "barry-mercer",
                                              "barry_mercer"])
    p_or.add_argument("--grid", type=int, default=64)
    p_or.add_argument("--times", default="0.1,0.5,1.0")
    p_or.add_argument("--modes", type=int, default=128)
    p_or.add_argument("--out")
    p_or.set_defaults(func=run_oracle)

    p_ck = sub.add_parser("check", help="run the fast invariant suite")
    p_ck.set_defaults(func=run_check)

    p_in = sub.add_parser("info", help="echo derived dimensionless numbers")
    p_in.add_argument("--benchmark", choices=[b.replace("_", "-")
                                              for b in BENCHMARKS]
                      + list(BENCHMARKS))
    p_in.add_argument("--dstar", type=float)
    p_in.set_defaults(func=run_info)

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
