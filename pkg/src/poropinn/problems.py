"""Built-in benchmark problems.

Each constructor assembles the field bundle, collocation sets, boundary data,
and the residual term list for one benchmark.  Terms carry a stage label so
the sequential driver can split them into flow and mechanics objectives; the
simultaneous driver trains them all at once.
"""

from dataclasses import dataclass, field as dc_field
from typing import Callable, Dict, List, Tuple

import numpy as np

from . import oracle, residuals
from .network import FieldBundle
from .nondim import (SinglePhasePhysical, SinglePhaseDimless, TwoPhasePhysical,
                     TwoPhaseDimless, derive_single_phase, derive_two_phase,
                     kdr_from_elastic)
from .residuals import (ResidualTerm, constitutive_state, kinematic_residual,
                        mass_residual_strain_split, mass_residual_stress_split,
                        momentum_residuals, stress_fields)
from .train import CollocationSet, sample_collocation

X, Y, T = 0, 1, 2

SINGLE_PHASE_NAMES = ("u_x", "u_y", "p", "eps_v")
TWO_PHASE_NAMES = ("u_x", "u_y", "p_c", "p_w", "eps_v")

GAUSS_ALPHA = 0.04  # width of the smoothed point source


@dataclass
class Problem:
    name: str
    bundle: FieldBundle
    colloc: CollocationSet
    flow_fields: Tuple[str, ...]
    mech_fields: Tuple[str, ...]
    box: tuple
    term_builder: Callable = None
    meta: dict = dc_field(default_factory=dict)
    _cache: dict = dc_field(default_factory=dict)

    def loss_terms(self, mode: str) -> List[ResidualTerm]:
        if mode not in self._cache:
            self._cache[mode] = self.term_builder(mode)
        return self._cache[mode]


def _dirichlet(region, name, data=0.0):
    def ev(ctx):
        return ctx.field(region, name).val - data
    return ev


def _flux(region, name, normal, gravity=(0.0, 0.0)):
    """Zero normal flux: n . (grad p - gravity term) = 0."""
    nx, ny = normal

    def ev(ctx):
        jet = ctx.field(region, name)
        r = 0.0
        if nx:
            r = r + nx * (jet.d(X) - gravity[0])
        if ny:
            r = r + ny * (jet.d(Y) - gravity[1])
        return r
    return ev


def _single_phase_jets(ctx, region):
    return {n: ctx.field(region, n) for n in SINGLE_PHASE_NAMES}


def _sp_stress_bc(region, comp, dimless, data=0.0):
    def ev(ctx):
        s = stress_fields(_single_phase_jets(ctx, region), dimless)
        return s[comp] - data
    return ev


def _sp_mass_evaluator(mode, dimless, f_fn=None):
    """Single-phase fluid mass term with mode-dependent coupling."""
    def ev(ctx):
        jets = {"p": ctx.field("interior", "p")}
        f_bar = f_fn(ctx.points("interior")) if f_fn is not None else 0.0
        if mode == "simultaneous":
            rate = (ctx.field("interior", "eps_v").d(T)
                    - dimless.b * jets["p"].d(T))
            return mass_residual_stress_split(jets, dimless, rate, f_bar)
        if mode == "stress":
            rate = (ctx.frozen_field("interior", "eps_v").d(T)
                    - dimless.b * ctx.frozen_field("interior", "p").d(T))
            return mass_residual_stress_split(jets, dimless, rate, f_bar)
        rate = ctx.frozen_field("interior", "eps_v").d(T)
        return mass_residual_strain_split(jets, dimless, rate, f_bar)
    return ev


def _sp_mech_terms(dimless):
    """Momentum and kinematic terms shared by the single-phase benchmarks."""
    def ev_mx(ctx):
        return momentum_residuals(_single_phase_jets(ctx, "interior"),
                                  dimless)[0]

    def ev_my(ctx):
        return momentum_residuals(_single_phase_jets(ctx, "interior"),
                                  dimless)[1]

    def ev_kin(ctx):
        return kinematic_residual(
            {n: ctx.field("interior", n) for n in ("u_x", "u_y", "eps_v")})

    return [
        ResidualTerm("momentum_x", "pde", "interior", ev_mx, "mech"),
        ResidualTerm("momentum_y", "pde", "interior", ev_my, "mech"),
        ResidualTerm("kinematic", "kinematic", "interior", ev_kin, "mech"),
    ]


# -- Mandel ------------------------------------------------------------------

def mandel_physical(M=1.2e9) -> SinglePhasePhysical:
    return SinglePhasePhysical(
        E=120e6, nu=0.25, b=1.0, M=M, k=1e-12, mu=0.6e-3,
        rho_b=2400.0, rho_f=1000.0, g=0.0, sigma0=-2e6,
        x_star=1.0, p_star=2e6)


def m_for_dstar(dstar, E=120e6, nu=0.25, b=1.0):
    """Biot modulus hitting a target coupling strength D*."""
    if not 0.0 < dstar < 1.0:
        raise ValueError(f"D* must be in (0, 1), got {dstar}")
    K_dr = kdr_from_elastic(E, nu)
    return K_dr * dstar / (b * (1.0 - b * dstar))


def mandel_problem(layer_sizes, counts, seed, phys=None,
                   n_roots=200) -> Problem:
    """Consolidation of a strip loaded on the left edge, drained on top.

    Dimensionless box [0,1]^2 x [0,1]; the left-edge normal stress carries the
    analytical stress history (a constant applied traction plus the transient
    redistribution), which is what makes the coupled response identifiable.
    """
    phys = phys or mandel_physical()
    dimless = derive_single_phase(phys)
    derived = oracle.mandel_derived(phys, n_roots=n_roots)
    box = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
    colloc = sample_collocation(box, counts, seed)
    # densify early times and the drained edge: the consolidation front sits
    # at depth ~sqrt(t) below y = 1, so uniform draws under-resolve the
    # initial transient there
    colloc.interior[:, 2] **= 2
    colloc.interior[:, 1] = 1.0 - (1.0 - colloc.interior[:, 1]) ** 1.5
    for name, edge in colloc.boundary.items():
        edge[:, 2] **= 2
        if name in ("left", "right"):
            edge[:, 1] = 1.0 - (1.0 - edge[:, 1]) ** 1.5
    # the undrained initial pressure and the drained top edge disagree at the
    # corner (y=1, t=0); collocating both on top of the discontinuity forces
    # the networks into a domain-wide compromise, so keep the IC away from
    # the drained edge and the drained edge away from t=0
    colloc.initial[:, 1] *= 0.9
    colloc.boundary["top"][:, 2] = 1e-3 + (1.0 - 1e-3) * colloc.boundary["top"][:, 2]
    bundle = FieldBundle.single_phase(list(layer_sizes), seed)

    sxx_data = _mandel_stress_data(phys, dimless, derived,
                                   colloc.boundary["left"], 0)
    syy_top = _mandel_stress_data(phys, dimless, derived,
                                  colloc.boundary["top"], 1)
    # undrained (Skempton) response to the step load; without it the flow
    # equation only pins the pressure up to a diffusion-homogeneous mode
    p0_bar = (derived.B * (1.0 + derived.nu_u) / 3.0
              * (-phys.sigma0) / phys.p_star)

    def build(mode):
        terms = [
            ResidualTerm("mass", "pde", "interior",
                         _sp_mass_evaluator(mode, dimless), "flow"),
            ResidualTerm("ic_p", "ic", "initial",
                         _dirichlet("initial", "p", p0_bar), "flow"),
            ResidualTerm("bc_q_left", "bc_neumann", "left",
                         _flux("left", "p", (-1.0, 0.0)), "flow"),
            ResidualTerm("bc_q_right", "bc_neumann", "right",
                         _flux("right", "p", (1.0, 0.0)), "flow"),
            ResidualTerm("bc_q_bottom", "bc_neumann", "bottom",
                         _flux("bottom", "p", (0.0, -1.0)), "flow"),
            ResidualTerm("bc_p_top", "bc_dirichlet", "top",
                         _dirichlet("top", "p"), "flow"),
        ]
        terms += _sp_mech_terms(dimless)
        terms += [
            ResidualTerm("bc_sxx_left", "bc_neumann", "left",
                         _sp_stress_bc("left", 0, dimless, sxx_data), "mech"),
            ResidualTerm("bc_sxy_left", "bc_neumann", "left",
                         _sp_stress_bc("left", 2, dimless), "mech"),
            ResidualTerm("bc_ux_right", "bc_dirichlet", "right",
                         _dirichlet("right", "u_x"), "mech"),
            ResidualTerm("bc_sxy_right", "bc_neumann", "right",
                         _sp_stress_bc("right", 2, dimless), "mech"),
            ResidualTerm("bc_uy_bottom", "bc_dirichlet", "bottom",
                         _dirichlet("bottom", "u_y"), "mech"),
            ResidualTerm("bc_sxy_bottom", "bc_neumann", "bottom",
                         _sp_stress_bc("bottom", 2, dimless), "mech"),
            ResidualTerm("bc_syy_top", "bc_neumann", "top",
                         _sp_stress_bc("top", 1, dimless, syy_top), "mech"),
            ResidualTerm("bc_sxy_top", "bc_neumann", "top",
                         _sp_stress_bc("top", 2, dimless), "mech"),
        ]
        return terms

    return Problem(name="mandel", bundle=bundle, colloc=colloc,
                   flow_fields=("p",), mech_fields=("u_x", "u_y", "eps_v"),
                   box=box, term_builder=build,
                   meta={"phys": phys, "dimless": dimless, "derived": derived})


def _mandel_stress_data(phys, dimless, derived, pts, comp):
    """Dimensionless boundary stress data consistent with stress_fields.

    The imposed stress uses the in-plane deviator convention of the component
    losses, so the boundary data must be evaluated through the same algebra
    (not the raw tensor components) for the analytical solution to satisfy
    the condition exactly.  Strains come from central differences of the
    series, which is analytic across the box edges.
    """
    h = 1e-5

    def f(dx=0.0, dy=0.0):
        p, u, v = oracle.mandel_solution((pts[:, 0] + dx) * phys.x_star,
                                         (pts[:, 1] + dy) * phys.x_star,
                                         pts[:, 2] * dimless.t_star,
                                         phys, derived)
        return p / phys.p_star, u / dimless.u_star, v / dimless.u_star

    p_bar = f()[0]
    e_xx = (f(dx=h)[1] - f(dx=-h)[1]) / (2 * h)
    e_yy = (f(dy=h)[2] - f(dy=-h)[2]) / (2 * h)
    e_xy = 0.5 * ((f(dy=h)[1] - f(dy=-h)[1]) / (2 * h)
                  + (f(dx=h)[2] - f(dx=-h)[2]) / (2 * h))
    eps_v = e_xx + e_yy
    mean = 0.5 * (e_xx + e_yy)
    three_nu = 3.0 * dimless.nu_star
    if comp == 0:
        return eps_v + three_nu * (e_xx - mean) - dimless.b * p_bar
    if comp == 1:
        return eps_v + three_nu * (e_yy - mean) - dimless.b * p_bar
    return three_nu * e_xy


def mandel_reference(phys, dimless, derived, pts):
    """Oracle fields at dimensionless points, returned dimensionless."""
    x = pts[:, 0] * phys.x_star
    y = pts[:, 1] * phys.x_star
    t = pts[:, 2] * dimless.t_star
    p, u, v = oracle.mandel_solution(x, y, t, phys, derived)
    return {"p": p / phys.p_star, "u_x": u / dimless.u_star,
            "u_y": v / dimless.u_star}


# -- Barry-Mercer ------------------------------------------------------------

def barry_mercer_physical() -> SinglePhasePhysical:
    # incompressible constituents: infinite Biot modulus, full coupling
    return SinglePhasePhysical(
        E=4.67e6, nu=0.167, b=1.0, M=np.inf, k=1e-10, mu=1e-3,
        x_star=1.0, p_star=5e6)


@dataclass
class BarryMercerMeta:
    phys: SinglePhasePhysical
    dimless: SinglePhaseDimless
    beta: float
    t_hat_max: float
    config: oracle.BarryMercerConfig


def barry_mercer_problem(layer_sizes, counts, seed, phys=None,
                         n_modes=128) -> Problem:
    """Pulsating point source in a square, all edges drained and sliding."""
    phys = phys or barry_mercer_physical()
    dimless = derive_single_phase(phys)
    beta = oracle.barry_mercer_beta(phys.E, phys.nu, phys.k, phys.mu)
    # one full source period 2*pi of the scaled time beta*t
    t_bar_max = 2.0 * np.pi / (beta * dimless.t_star)
    box = ((0.0, 1.0), (0.0, 1.0), (0.0, t_bar_max))
    colloc = sample_collocation(box, counts, seed)
    bundle = FieldBundle.single_phase(list(layer_sizes), seed)

    lam2g = beta * phys.mu / phys.k      # = E(1-nu)/((1+nu)(1-2nu)), a=b=1
    amp = 2.0 * lam2g / phys.p_star
    x0 = y0 = 0.25
    a = GAUSS_ALPHA

    def gauss(r):
        return np.exp(-(r / a) ** 2) / (a * np.sqrt(np.pi))

    def source(pts):
        return (amp * np.sin(beta * dimless.t_star * pts[:, 2])
                * gauss(pts[:, 0] - x0) * gauss(pts[:, 1] - y0))

    def build(mode):
        terms = [
            ResidualTerm("mass", "pde", "interior",
                         _sp_mass_evaluator(mode, dimless, source), "flow"),
        ]
        for edge in ("left", "right", "bottom", "top"):
            terms.append(ResidualTerm(f"bc_p_{edge}", "bc_dirichlet", edge,
                                      _dirichlet(edge, "p"), "flow"))
        terms.append(ResidualTerm("ic_p", "ic", "initial",
                                  _dirichlet("initial", "p"), "flow"))
        terms += _sp_mech_terms(dimless)
        for edge, tangy, scomp in (("left", "u_y", 0), ("right", "u_y", 0),
                                   ("bottom", "u_x", 1), ("top", "u_x", 1)):
            terms.append(ResidualTerm(f"bc_{tangy}_{edge}", "bc_dirichlet",
                                      edge, _dirichlet(edge, tangy), "mech"))
            terms.append(ResidualTerm(f"bc_sn_{edge}", "bc_neumann", edge,
                                      _sp_stress_bc(edge, scomp, dimless),
                                      "mech"))
        for name in ("u_x", "u_y", "eps_v"):
            terms.append(ResidualTerm(f"ic_{name}", "ic", "initial",
                                      _dirichlet("initial", name), "mech"))
        return terms

    cfg = oracle.BarryMercerConfig(beta=beta, n_modes=n_modes, q_modes=n_modes)
    return Problem(name="barry_mercer", bundle=bundle, colloc=colloc,
                   flow_fields=("p",), mech_fields=("u_x", "u_y", "eps_v"),
                   box=box, term_builder=build,
                   meta={"phys": phys, "dimless": dimless, "beta": beta,
                         "t_bar_max": t_bar_max, "bm_config": cfg})


def barry_mercer_reference(meta, pts):
    phys, dimless = meta["phys"], meta["dimless"]
    beta, cfg = meta["beta"], meta["bm_config"]
    t_hat = beta * dimless.t_star * pts[:, 2]
    p, u, v = oracle.barry_mercer_solution(pts[:, 0], pts[:, 1], t_hat, cfg,
                                           (phys.E, phys.nu))
    return {"p": p / phys.p_star, "u_x": u / dimless.u_star,
            "u_y": v / dimless.u_star}


# -- two-phase drainage ------------------------------------------------------

def drainage_physical() -> TwoPhasePhysical:
    return TwoPhasePhysical(
        E=1.3e6, nu=0.4, b=1.0, phi=0.2975, K_s=1e12,
        c_w=5e-10, c_n=1e-5, k=4.5e-13, mu_w=1e-3, mu_n=1.8e-5,
        rho_s=2400.0, rho_w=1000.0, rho_n=1.2, g=9.806,
        x_star=1.0, p_star=1000.0 * 9.806 * 1.0)


def drainage_problem(layer_sizes, counts, seed, phys=None,
                     width=0.2, t_bar_max=5.0) -> Problem:
    """Gravity drainage of an initially saturated soil column.

    Pressures are trained as totals over the hydrostatic initial state; the
    mechanics is driven by the equivalent-pressure and buoyancy increments so
    that the initial state is the exact zero of the displacement networks.
    """
    phys = phys or drainage_physical()
    dimless = derive_two_phase(phys, S_w=1.0)
    box = ((0.0, width), (0.0, 1.0), (0.0, t_bar_max))
    colloc = sample_collocation(box, counts, seed)
    bundle = FieldBundle.two_phase(list(layer_sizes), seed)
    b = phys.b
    d = (0.0, -1.0)
    gamma_w = (phys.rho_w / phys.rho) * dimless.N_d
    gamma_n = (phys.rho_n / phys.rho) * dimless.N_d

    def con_of(ctx, region, frozen=False):
        get = ctx.frozen_field if frozen else ctx.field
        pc = get(region, "p_c")
        return pc, constitutive_state(pc.val, phys.p_star, rho_w=phys.rho_w,
                                      g=phys.g, clamp_warn=not frozen)

    def dpE_dt(pw, pc, con):
        # d/dt of p_w + S_n p_c with S_n = S_n(p_c)
        factor = con.S_n - pc.val * con.dSw_dpc * phys.p_star
        return pw.d(T) + factor * pc.d(T)

    def mass_evaluator(mode, phase):
        def ev(ctx):
            pw = ctx.field("interior", "p_w")
            pc, con = con_of(ctx, "interior")
            jets = {"p_w": pw, "p_c": pc}
            if mode == "simultaneous":
                rate = (ctx.field("interior", "eps_v").d(T)
                        - b * dpE_dt(pw, pc, con))
                split = "stress_split"
            elif mode == "stress":
                fpw = ctx.frozen_field("interior", "p_w")
                fpc, fcon = con_of(ctx, "interior", frozen=True)
                rate = (ctx.frozen_field("interior", "eps_v").d(T)
                        - b * dpE_dt(fpw, fpc, fcon))
                split = "stress_split"
            else:
                rate = ctx.frozen_field("interior", "eps_v").d(T)
                split = "strain_split"
            r_w, r_n = residuals.two_phase_mass_residuals(
                jets, phys, dimless, rate, split, d=d, con=con)
            return r_w if phase == "w" else r_n
        return ev

    def pE_increment(ctx, region):
        pw = ctx.field(region, "p_w")
        pc, con = con_of(ctx, region, frozen=not ctx.is_live("p_w"))
        y = ctx.points(region)[:, 1]
        return pw.val + con.S_n * pc.val - (1.0 - y), con

    def mech_parts(ctx):
        pw = ctx.field("interior", "p_w")
        pc, con = con_of(ctx, "interior", frozen=not ctx.is_live("p_w"))
        factor = con.S_n - pc.val * con.dSw_dpc * phys.p_star
        # gradient of the equivalent-pressure increment over hydrostatic
        g_x = pw.d(X) + factor * pc.d(X)
        g_y = pw.d(Y) + factor * pc.d(Y) + 1.0
        # buoyancy increment: gas replacing water in the pores
        drho = phys.phi * con.S_n * (phys.rho_n - phys.rho_w) / phys.rho
        body = (0.0, -(drho * dimless.N_d) * d[1])
        jets = {n: ctx.field("interior", n) for n in ("u_x", "u_y", "eps_v")}
        return momentum_residuals(jets, dimless, d=d,
                                  pressure_grad=(g_x, g_y), body=body)

    def ev_kin(ctx):
        return kinematic_residual(
            {n: ctx.field("interior", n) for n in ("u_x", "u_y", "eps_v")})

    def stress_bc(region, comp):
        def ev(ctx):
            dpE, _ = pE_increment(ctx, region)
            jets = {n: ctx.field(region, n)
                    for n in ("u_x", "u_y", "eps_v")}
            s = stress_fields(jets, dimless, pressure=dpE)
            return s[comp]
        return ev

    def ic_pw(ctx):
        y = ctx.points("initial")[:, 1]
        return ctx.field("initial", "p_w").val - (1.0 - y)

    def gas_pressure_bc(region):
        def ev(ctx):
            return (ctx.field(region, "p_w").val
                    + ctx.field(region, "p_c").val)
        return ev

    def gas_no_flux(region, normal):
        nx, ny = normal

        def ev(ctx):
            pw = ctx.field(region, "p_w")
            pc = ctx.field(region, "p_c")
            r = 0.0
            if nx:
                r = r + nx * (pw.d(X) + pc.d(X) - gamma_n * d[0])
            if ny:
                r = r + ny * (pw.d(Y) + pc.d(Y) - gamma_n * d[1])
            return r
        return ev

    def build(mode):
        terms = [
            ResidualTerm("mass_w", "pde", "interior",
                         mass_evaluator(mode, "w"), "flow"),
            ResidualTerm("mass_n", "pde", "interior",
                         mass_evaluator(mode, "n"), "flow"),
            ResidualTerm("bc_pw_bottom", "bc_dirichlet", "bottom",
                         _dirichlet("bottom", "p_w"), "flow"),
            ResidualTerm("bc_pc_bottom", "bc_dirichlet", "bottom",
                         _dirichlet("bottom", "p_c"), "flow"),
            ResidualTerm("bc_pg_top", "bc_dirichlet", "top",
                         gas_pressure_bc("top"), "flow"),
            ResidualTerm("bc_qw_top", "bc_neumann", "top",
                         _flux("top", "p_w", (0.0, 1.0),
                               gravity=(0.0, gamma_w * d[1])), "flow"),
            ResidualTerm("bc_qw_left", "bc_neumann", "left",
                         _flux("left", "p_w", (-1.0, 0.0)), "flow"),
            ResidualTerm("bc_qw_right", "bc_neumann", "right",
                         _flux("right", "p_w", (1.0, 0.0)), "flow"),
            ResidualTerm("bc_qg_left", "bc_neumann", "left",
                         gas_no_flux("left", (-1.0, 0.0)), "flow"),
            ResidualTerm("bc_qg_right", "bc_neumann", "right",
                         gas_no_flux("right", (1.0, 0.0)), "flow"),
            ResidualTerm("ic_pw", "ic", "initial", ic_pw, "flow"),
            ResidualTerm("ic_pc", "ic", "initial",
                         _dirichlet("initial", "p_c"), "flow"),
        ]
        terms += [
            ResidualTerm("momentum_x", "pde", "interior",
                         lambda ctx: mech_parts(ctx)[0], "mech"),
            ResidualTerm("momentum_y", "pde", "interior",
                         lambda ctx: mech_parts(ctx)[1], "mech"),
            ResidualTerm("kinematic", "kinematic", "interior", ev_kin, "mech"),
            ResidualTerm("bc_ux_bottom", "bc_dirichlet", "bottom",
                         _dirichlet("bottom", "u_x"), "mech"),
            ResidualTerm("bc_uy_bottom", "bc_dirichlet", "bottom",
                         _dirichlet("bottom", "u_y"), "mech"),
            ResidualTerm("bc_syy_top", "bc_neumann", "top",
                         stress_bc("top", 1), "mech"),
            ResidualTerm("bc_sxy_top", "bc_neumann", "top",
                         stress_bc("top", 2), "mech"),
            ResidualTerm("bc_ux_left", "bc_dirichlet", "left",
                         _dirichlet("left", "u_x"), "mech"),
            ResidualTerm("bc_sxy_left", "bc_neumann", "left",
                         stress_bc("left", 2), "mech"),
            ResidualTerm("bc_ux_right", "bc_dirichlet", "right",
                         _dirichlet("right", "u_x"), "mech"),
            ResidualTerm("bc_sxy_right", "bc_neumann", "right",
                         stress_bc("right", 2), "mech"),
            ResidualTerm("ic_ux", "ic", "initial",
                         _dirichlet("initial", "u_x"), "mech"),
            ResidualTerm("ic_uy", "ic", "initial",
                         _dirichlet("initial", "u_y"), "mech"),
            ResidualTerm("ic_eps_v", "ic", "initial",
                         _dirichlet("initial", "eps_v"), "mech"),
        ]
        return terms

    return Problem(name="drainage", bundle=bundle, colloc=colloc,
                   flow_fields=("p_c", "p_w"),
                   mech_fields=("u_x", "u_y", "eps_v"),
                   box=box, term_builder=build,
                   meta={"phys": phys, "dimless": dimless})
