"""Residual builders for the dimensionless poroelastic systems.

Every builder maps second-order jets of the field networks (or frozen
snapshots wrapped as constant jets) to batched residual expressions on the
reverse-mode tape.  Inputs are ordered (x, y, t); all quantities are
dimensionless unless a name says otherwise.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .autodiff import tape
from .autodiff.jets import JetBatch
from .autodiff.tape import Var

log = logging.getLogger(__name__)

X, Y, T = 0, 1, 2


@dataclass
class ResidualTerm:
    """One named term of a loss bundle.

    kind: pde | bc_dirichlet | bc_neumann | ic | kinematic
    region: key into the collocation sets of the problem
    evaluator: maps {field: JetBatch} -> batched residual Var
    """
    name: str
    kind: str
    region: str
    evaluator: Callable
    stage: str = "both"  # flow | mech | both


# -- single-phase PDE residuals ---------------------------------------------

def momentum_residuals(jets, dimless, d=(0.0, 0.0), pressure_grad=None,
                       body=None):
    """Quasi-static momentum balance in component form.

    pressure_grad overrides the (b-scaled) pore-pressure gradient, e.g. with
    an equivalent-pressure gradient in the two-phase system or a frozen
    snapshot in sequential mode.  body overrides the gravity term N_d * d.
    """
    u_x, u_y, eps_v = jets["u_x"], jets["u_y"], jets["eps_v"]
    if pressure_grad is None:
        pressure_grad = (jets["p"].d(X), jets["p"].d(Y))
    if body is None:
        body = (dimless.N_d * d[0], dimless.N_d * d[1])
    nu_s = dimless.nu_star
    r_x = (eps_v.d(X)
           + 0.5 * nu_s * (u_x.d2(X, X) + u_y.d2(X, Y))
           + 1.5 * nu_s * (u_x.d2(X, X) + u_x.d2(Y, Y))
           - dimless.b * pressure_grad[0] - body[0])
    r_y = (eps_v.d(Y)
           + 0.5 * nu_s * (u_y.d2(Y, Y) + u_x.d2(X, Y))
           + 1.5 * nu_s * (u_y.d2(X, X) + u_y.d2(Y, Y))
           - dimless.b * pressure_grad[1] - body[1])
    return r_x, r_y


def sigma_v_rate(jets, dimless):
    """Time derivative of the volumetric total stress from live fields."""
    return jets["eps_v"].d(T) - dimless.b * jets["p"].d(T)


def mass_residual_stress_split(jets, dimless, sigma_v_rate, f_bar=0.0):
    """Fixed-stress fluid mass balance.

    sigma_v_rate is d(sigma_v)/dt: a Var for live coupling or a plain array
    for a frozen snapshot from the previous sequential iterate.
    """
    if sigma_v_rate is None:
        raise ValueError("stress-split mass residual requires a volumetric "
                         "stress rate (frozen snapshot or live fields)")
    p = jets["p"]
    lap = p.d2(X, X) + p.d2(Y, Y)
    return p.d(T) - lap + dimless.D_star * sigma_v_rate - f_bar


def mass_residual_strain_split(jets, dimless, eps_v_rate, f_bar=0.0):
    """Fixed-strain fluid mass balance; eps_v_rate as in the stress split."""
    if eps_v_rate is None:
        raise ValueError("strain-split mass residual requires a volumetric "
                         "strain rate (frozen snapshot or live fields)")
    p = jets["p"]
    lap = p.d2(X, X) + p.d2(Y, Y)
    coeff = 1.0 - dimless.b * dimless.D_star
    return coeff * p.d(T) - lap + dimless.D_star * eps_v_rate - f_bar


def kinematic_residual(jets):
    """eps_v network tied to the divergence of the displacement networks."""
    return jets["eps_v"].val - (jets["u_x"].d(X) + jets["u_y"].d(Y))


def stress_fields(jets, dimless, p_ref=0.0, pressure=None):
    """Plane components of the dimensionless stress increment.

    The volumetric part comes from the eps_v network; the deviator from the
    in-plane displacement jets (in-plane mean removed).  Returns
    (s_xx, s_yy, s_xy, s_v).
    """
    if pressure is None:
        pressure = jets["p"].val
    dp = pressure - p_ref
    e_xx = jets["u_x"].d(X)
    e_yy = jets["u_y"].d(Y)
    e_xy = 0.5 * (jets["u_x"].d(Y) + jets["u_y"].d(X))
    mean_in_plane = 0.5 * (e_xx + e_yy)
    eps_v = jets["eps_v"].val
    three_nu = 3.0 * dimless.nu_star
    s_xx = eps_v + three_nu * (e_xx - mean_in_plane) - dimless.b * dp
    s_yy = eps_v + three_nu * (e_yy - mean_in_plane) - dimless.b * dp
    s_xy = three_nu * e_xy
    s_v = eps_v - dimless.b * dp
    return s_xx, s_yy, s_xy, s_v


# -- Liakopoulos constitutive relations -------------------------------------

BC_EXPONENT = 2.4279      # Brooks-Corey saturation exponent of the sand
PC_COEFF = 2.57           # capillary entry coefficient, times rho_w * g
S_RW = 0.2                # residual water saturation
PORE_LAMBDA = 3.0         # pore-size distribution index
KRG_FLOOR = 1e-4          # floor keeping the gas mobility away from zero
KRW_FLOOR = 1e-4          # same role on the training path for water


def capillary_pressure(S_w, rho_w=1000.0, g=9.806):
    """p_c(S_w) in Pa for the Liakopoulos sand."""
    A = PC_COEFF * rho_w * g
    return A * tape.power(1.0 - S_w, 1.0 / BC_EXPONENT)


def saturation_from_pc(p_c, rho_w=1000.0, g=9.806):
    """Closed-form inverse S_w(p_c); p_c <= 0 maps to full saturation."""
    A = PC_COEFF * rho_w * g
    return 1.0 - tape.power(tape.maximum(p_c, 0.0) / A, BC_EXPONENT)


def dSw_dpc(p_c, rho_w=1000.0, g=9.806):
    """Analytic slope of the inverse relation; zero on the saturated branch."""
    A = PC_COEFF * rho_w * g
    return (-BC_EXPONENT / A) * tape.power(tape.maximum(p_c, 0.0) / A,
                                           BC_EXPONENT - 1.0)


def rel_perm_water(S_w):
    """k_rw raw formula; callers on the training path apply the floor."""
    return 1.0 - 2.2 * (1.0 - S_w)


def rel_perm_gas(S_w):
    """Brooks-Corey gas relative permeability with the tabulated floor."""
    S_e = (S_w - S_RW) / (1.0 - S_RW)
    expo = (2.0 + PORE_LAMBDA) / PORE_LAMBDA
    raw = tape.square(1.0 - S_e) * (1.0 - tape.power(S_e, expo))
    return tape.maximum(raw, KRG_FLOOR)


def liakopoulos_constitutive(value, from_pc=False, rho_w=1000.0, g=9.806):
    """Sand constitutive bundle.

    from_pc=False: value is S_w, returns (p_c, k_rw, k_rg, dSw_dpc).
    from_pc=True: value is p_c in Pa, returns (S_w, k_rw, k_rg, dSw_dpc).
    """
    if from_pc:
        S_w = saturation_from_pc(value, rho_w, g)
        slope = dSw_dpc(value, rho_w, g)
        return S_w, rel_perm_water(S_w), rel_perm_gas(S_w), slope
    S_w = value
    p_c = capillary_pressure(S_w, rho_w, g)
    slope = dSw_dpc(p_c, rho_w, g)
    return p_c, rel_perm_water(S_w), rel_perm_gas(S_w), slope


# -- two-phase residuals -----------------------------------------------------

@dataclass
class ConstitutiveState:
    """Pointwise constitutive quantities evaluated from the p_c field.

    Var expressions (gradients flow to the p_c network) plus the plain masks
    needed for hand-written spatial chain rules through the clamps.
    """
    S_w: Var
    S_n: Var
    dSw_dpc: Var
    k_rw: Var
    k_rg: Var
    dkrw_dSw: np.ndarray
    dkrg_dSw: np.ndarray


_clamp_warned = [0]


def constitutive_state(pc_bar, p_star, rho_w=1000.0, g=9.806,
                       clamp_warn=True) -> ConstitutiveState:
    """Evaluate the Liakopoulos bundle on a dimensionless p_c expression.

    Saturations falling below the residual value are clamped with a logged
    warning; early-epoch networks routinely overshoot the physical range.
    """
    pc_phys = pc_bar * p_star
    S_w_raw = saturation_from_pc(pc_phys, rho_w, g)
    raw_val = S_w_raw.data if isinstance(S_w_raw, Var) else np.asarray(S_w_raw)
    n_low = int(np.count_nonzero(raw_val < S_RW))
    if n_low and clamp_warn:
        _clamp_warned[0] += 1
        if _clamp_warned[0] <= 5 or _clamp_warned[0] % 1000 == 0:
            log.warning("saturation clamped to [%g, 1] at %d points", S_RW, n_low)
    sat_mask = (raw_val >= S_RW).astype(np.float64)
    S_w = tape.maximum(S_w_raw, S_RW)
    S_n = 1.0 - S_w
    slope = dSw_dpc(pc_phys, rho_w, g) * sat_mask

    krw_raw = rel_perm_water(S_w)
    krw_val = krw_raw.data if isinstance(krw_raw, Var) else np.asarray(krw_raw)
    k_rw = tape.maximum(krw_raw, KRW_FLOOR)
    dkrw = 2.2 * sat_mask * (krw_val > KRW_FLOOR)

    S_w_val = S_w.data if isinstance(S_w, Var) else np.asarray(S_w)
    S_e = (S_w_val - S_RW) / (1.0 - S_RW)
    expo = (2.0 + PORE_LAMBDA) / PORE_LAMBDA
    krg_raw = (1.0 - S_e) ** 2 * (1.0 - S_e**expo)
    dkrg_dSe = (-2.0 * (1.0 - S_e) * (1.0 - S_e**expo)
                - expo * (1.0 - S_e) ** 2 * S_e ** (expo - 1.0))
    dkrg = dkrg_dSe / (1.0 - S_RW) * sat_mask * (krg_raw > KRG_FLOOR)
    k_rg = rel_perm_gas(S_w)
    return ConstitutiveState(S_w=S_w, S_n=S_n, dSw_dpc=slope,
                             k_rw=k_rw, k_rg=k_rg,
                             dkrw_dSw=dkrw, dkrg_dSw=dkrg)


def n_matrix_entries(phys, S_w, slope):
    """Inverse Biot modulus entries (N_ww, N_wn, N_nn); Var-friendly."""
    from .nondim import kdr_from_elastic
    K_dr = kdr_from_elastic(phys.E, phys.nu)
    N = (phys.b - phys.phi) * (1.0 - phys.b) / K_dr
    S_n = 1.0 - S_w
    N_ww = -phys.phi * slope + phys.phi * phys.c_w * S_w + S_w * S_w * N
    N_nn = -phys.phi * slope + phys.phi * phys.c_n * S_n + S_n * S_n * N
    N_wn = phys.phi * slope + S_n * S_w * N
    return N_ww, N_wn, N_nn


def equivalent_pressure_gradient(jets, con, p_star):
    """Spatial gradient of p_E = p_w + S_n * p_c (dimensionless), with the
    saturation dependence expanded by the chain rule through S_w(p_c)."""
    p_w, p_c = jets["p_w"], jets["p_c"]
    # d(S_n p_c)/dx = S_n dp_c/dx - p_c * dSw/dpc * p* * dp_c/dx
    factor = con.S_n - p_c.val * con.dSw_dpc * p_star
    g_x = p_w.d(X) + factor * p_c.d(X)
    g_y = p_w.d(Y) + factor * p_c.d(Y)
    return g_x, g_y


def two_phase_mass_residuals(jets, phys, dimless, coupling_rates, mode,
                             d=(0.0, -1.0), f_w=0.0, f_n=0.0, con=None):
    """Per-phase fluid mass balance of the two-phase system.

    coupling_rates: (d eps_v/dt) in strain-split mode or (d sigma_v/dt) in
    stress-split mode; Var for live coupling, array for a frozen snapshot.
    In stress-split mode the storage matrix is augmented by the product of
    the phase Biot coefficients over the drained modulus.
    Returns (r_w, r_n).
    """
    if mode not in ("stress_split", "strain_split"):
        raise ValueError(f"unknown split mode: {mode}")
    if coupling_rates is None:
        raise ValueError("two-phase mass residuals require a volumetric "
                         "coupling rate (frozen snapshot or live fields)")
    p_w, p_c = jets["p_w"], jets["p_c"]
    if con is None:
        con = constitutive_state(p_c.val, phys.p_star)

    M_star = dimless.M_bar_star
    K_dr = dimless.K_dr
    N_ww, N_wn, N_nn = n_matrix_entries(phys, con.S_w, con.dSw_dpc)
    if mode == "stress_split":
        b = phys.b
        N_ww = N_ww + (con.S_w * b) * (con.S_w * b) / K_dr
        N_wn = N_wn + (con.S_w * b) * (con.S_n * b) / K_dr
        N_nn = N_nn + (con.S_n * b) * (con.S_n * b) / K_dr

    dpw_dt = p_w.d(T)
    dpn_dt = p_w.d(T) + p_c.d(T)  # nonwetting pressure is p_w + p_c

    D_w = con.S_w * phys.b * M_star / K_dr
    D_n = con.S_n * phys.b * M_star / K_dr

    gamma_w = (phys.rho_w / phys.rho) * dimless.N_d
    gamma_n = (phys.rho_n / phys.rho) * dimless.N_d

    def darcy_divergence(k_r, dk_dSw, grad, lap, gamma):
        # div[k_r (grad p - gamma d)] expanded: the relative permeability
        # varies in space only through S_w(p_c).
        gk_x = dk_dSw * con.dSw_dpc * phys.p_star * p_c.d(X)
        gk_y = dk_dSw * con.dSw_dpc * phys.p_star * p_c.d(Y)
        return (gk_x * (grad[0] - gamma * d[0])
                + gk_y * (grad[1] - gamma * d[1])
                + k_r * lap)

    grad_w = (p_w.d(X), p_w.d(Y))
    lap_w = p_w.d2(X, X) + p_w.d2(Y, Y)
    grad_n = (p_w.d(X) + p_c.d(X), p_w.d(Y) + p_c.d(Y))
    lap_n = lap_w + p_c.d2(X, X) + p_c.d2(Y, Y)

    mob_w = phys.mu / phys.mu_w
    mob_n = phys.mu / phys.mu_n
    r_w = (M_star * (N_ww * dpw_dt + N_wn * dpn_dt)
           + D_w * coupling_rates
           - mob_w * darcy_divergence(con.k_rw, con.dkrw_dSw, grad_w, lap_w,
                                      gamma_w)
           - f_w)
    r_n = (M_star * (N_wn * dpw_dt + N_nn * dpn_dt)
           + D_n * coupling_rates
           - mob_n * darcy_divergence(con.k_rg, con.dkrg_dSw, grad_n, lap_n,
                                      gamma_n)
           - f_n)
    return r_w, r_n
