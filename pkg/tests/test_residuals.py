"""Tests for the dimensionless residual builders and constitutive relations.

Reference values come from hand-differentiated polynomial fields: with
low-order polynomials every derivative is exact, so the builders can be
checked to round-off.
"""

import dataclasses

import numpy as np
import pytest

from poropinn import nondim, problems, residuals
from poropinn.autodiff.jets import JetBatch, sym_pairs
from poropinn.autodiff import tape


def jet(val, grad=None, hess=None):
    """Constant-coefficient jet batch over 3 inputs."""
    val = np.atleast_1d(np.asarray(val, dtype=np.float64))
    n = val.size
    g = np.zeros((n, 3))
    h = np.zeros((n, 6))
    if grad is not None:
        g[:] = np.asarray(grad, dtype=np.float64)
    if hess is not None:
        h[:] = np.asarray(hess, dtype=np.float64)
    return JetBatch.from_constant(3, val, g, h)


def zero_jet(n=1):
    return jet(np.zeros(n))


PAIR = {p: k for k, p in enumerate(sym_pairs(3))}


def poly_jet(pts, coeffs, rng=None):
    """Jet of a random full quadratic in (x, y, t) with exact derivatives."""
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    c = coeffs  # dict: '1','x','y','t','xx','yy','tt','xy','xt','yt'
    val = (c["1"] + c["x"] * x + c["y"] * y + c["t"] * t
           + c["xx"] * x * x + c["yy"] * y * y + c["tt"] * t * t
           + c["xy"] * x * y + c["xt"] * x * t + c["yt"] * y * t)
    g = np.column_stack([
        c["x"] + 2 * c["xx"] * x + c["xy"] * y + c["xt"] * t,
        c["y"] + 2 * c["yy"] * y + c["xy"] * x + c["yt"] * t,
        c["t"] + 2 * c["tt"] * t + c["xt"] * x + c["yt"] * y,
    ])
    h = np.zeros((pts.shape[0], 6))
    h[:, PAIR[(0, 0)]] = 2 * c["xx"]
    h[:, PAIR[(1, 1)]] = 2 * c["yy"]
    h[:, PAIR[(2, 2)]] = 2 * c["tt"]
    h[:, PAIR[(0, 1)]] = c["xy"]
    h[:, PAIR[(0, 2)]] = c["xt"]
    h[:, PAIR[(1, 2)]] = c["yt"]
    return JetBatch.from_constant(3, val, g, h)


def random_coeffs(rng):
    keys = ("1", "x", "y", "t", "xx", "yy", "tt", "xy", "xt", "yt")
    return {k: rng.uniform(-1, 1) for k in keys}


def dimless_sp(nu_star=0.4, b=1.0, D_star=0.9375, N_d=0.0):
    return nondim.SinglePhaseDimless(
        nu_star=nu_star, b=b, D_star=D_star, N_d=N_d, t_star=1.0,
        u_star=1.0, eps_star=1.0, f_star_scale=1.0, K_dr=1.0)


# ---------------------------------------------------------------------------
# single-phase residuals against hand-worked values
# ---------------------------------------------------------------------------

def test_momentum_hand_worked():
    # u_x = x^2, p = x, everything else zero; nu* = 0.4, b = 1, no gravity
    d = dimless_sp()
    jets = {
        "u_x": jet(1.0, hess=[[2.0, 0, 0, 0, 0, 0]]),  # d2/dx2 = 2
        "u_y": zero_jet(),
        "eps_v": zero_jet(),
        "p": jet(0.0, grad=[[1.0, 0.0, 0.0]]),
    }
    r_x, r_y = residuals.momentum_residuals(jets, d)
    # 0.5*0.4*2 + 1.5*0.4*2 - 1*1 = 0.6
    assert r_x.data[0] == pytest.approx(0.6, abs=1e-15)
    assert r_y.data[0] == pytest.approx(0.0, abs=1e-15)


def test_momentum_gravity_and_override():
    d = dimless_sp(N_d=2.0)
    jets = {"u_x": zero_jet(), "u_y": zero_jet(), "eps_v": zero_jet(),
            "p": zero_jet()}
    r_x, r_y = residuals.momentum_residuals(jets, d, d=(0.0, -1.0))
    assert r_y.data[0] == pytest.approx(2.0)  # -(N_d * d_y)
    # overriding the pressure gradient bypasses the p jet entirely
    r_x2, _ = residuals.momentum_residuals(
        jets, d, pressure_grad=(np.array([3.0]), np.array([0.0])),
        body=(0.0, 0.0))
    assert r_x2.data[0] == pytest.approx(-3.0)


def test_mass_stress_split_hand_worked():
    # p = x^2, d(sigma_v)/dt = 1, D* = 0.9375: r = 0 - 2 + 0.9375
    d = dimless_sp()
    jets = {"p": jet(0.25, grad=[[1.0, 0, 0]], hess=[[2.0, 0, 0, 0, 0, 0]])}
    r = residuals.mass_residual_stress_split(jets, d, np.array([1.0]))
    assert r.data[0] == pytest.approx(-1.0625, abs=1e-15)


def test_mass_strain_split_hand_worked():
    # p = t, d(eps_v)/dt = 1, b = 1, D* = 0.5: r = 0.5*1 - 0 + 0.5*1 = 1
    d = dimless_sp(D_star=0.5)
    jets = {"p": jet(0.0, grad=[[0.0, 0.0, 1.0]])}
    r = residuals.mass_residual_strain_split(jets, d, np.array([1.0]))
    assert r.data[0] == pytest.approx(1.0, abs=1e-15)


def test_mass_requires_coupling_rate():
    d = dimless_sp()
    jets = {"p": zero_jet()}
    with pytest.raises(ValueError):
        residuals.mass_residual_stress_split(jets, d, None)
    with pytest.raises(ValueError):
        residuals.mass_residual_strain_split(jets, d, None)


def test_kinematic_hand_worked():
    jets = {"u_x": jet(0.0, grad=[[1.0, 0, 0]]), "u_y": zero_jet(),
            "eps_v": jet(0.5)}
    r = residuals.kinematic_residual(jets)
    assert r.data[0] == pytest.approx(-0.5)


def test_stress_fields_pure_shearless_deviator():
    # e_xx = 1, e_yy = -1, nu* = 0.4, no pressure, no eps_v
    d = dimless_sp()
    jets = {"u_x": jet(0.0, grad=[[1.0, 0, 0]]),
            "u_y": jet(0.0, grad=[[0.0, -1.0, 0]]),
            "eps_v": zero_jet(), "p": zero_jet()}
    s_xx, s_yy, s_xy, s_v = residuals.stress_fields(jets, d)
    assert s_xx.data[0] == pytest.approx(1.2)
    assert s_yy.data[0] == pytest.approx(-1.2)
    assert s_xy.data[0] == pytest.approx(0.0)
    assert s_v.data[0] == pytest.approx(0.0)


def test_stress_fields_pure_pressure():
    d = dimless_sp()
    jets = {"u_x": zero_jet(), "u_y": zero_jet(), "eps_v": zero_jet(),
            "p": jet(1.0)}
    s_xx, s_yy, s_xy, s_v = residuals.stress_fields(jets, d)
    assert s_xx.data[0] == pytest.approx(-1.0)
    assert s_yy.data[0] == pytest.approx(-1.0)
    assert s_xy.data[0] == pytest.approx(0.0)
    assert s_v.data[0] == pytest.approx(-1.0)


def test_stress_fields_shear():
    d = dimless_sp()
    jets = {"u_x": jet(0.0, grad=[[0.0, 0.5, 0]]),
            "u_y": jet(0.0, grad=[[0.5, 0.0, 0]]),
            "eps_v": zero_jet(), "p": zero_jet()}
    _, _, s_xy, _ = residuals.stress_fields(jets, d)
    assert s_xy.data[0] == pytest.approx(3 * 0.4 * 0.5)


def test_split_mode_equivalence_single_phase():
    """Substituting the stress/strain rate identity makes the two mass
    residuals agree identically."""
    rng = np.random.default_rng(7)
    pts = rng.uniform(0, 1, (32, 3))
    d = dimless_sp(D_star=0.77, b=0.9)
    p = poly_jet(pts, random_coeffs(rng))
    eps_rate = rng.uniform(-1, 1, 32)
    sigma_rate = eps_rate - d.b * p.d(2).data
    r_stress = residuals.mass_residual_stress_split({"p": p}, d, sigma_rate)
    r_strain = residuals.mass_residual_strain_split({"p": p}, d, eps_rate)
    np.testing.assert_allclose(r_stress.data, r_strain.data,
                               rtol=1e-10, atol=1e-12)


# ---------------------------------------------------------------------------
# Liakopoulos constitutive relations
# ---------------------------------------------------------------------------

RHO_G = 1000.0 * 9.806


def val(x):
    """Numeric payload of either a tape Var or a plain array."""
    return x.data if isinstance(x, tape.Var) else np.asarray(x)


def test_capillary_endpoints():
    assert residuals.capillary_pressure(1.0) == pytest.approx(0.0, abs=1e-12)
    assert residuals.capillary_pressure(0.9) == pytest.approx(
        2.57 * RHO_G * 0.1 ** (1 / 2.4279), rel=1e-12)


def test_saturation_roundtrip():
    for s in np.linspace(0.21, 0.999, 40):
        pc = residuals.capillary_pressure(s)
        assert residuals.saturation_from_pc(pc) == pytest.approx(s, abs=1e-12)
    # negative capillary pressure means fully saturated
    assert residuals.saturation_from_pc(-100.0) == 1.0


def test_dSw_dpc_matches_finite_difference():
    pc = np.linspace(100.0, 20000.0, 20)
    h = 1e-3
    fd = (residuals.saturation_from_pc(pc + h)
          - residuals.saturation_from_pc(pc - h)) / (2 * h)
    np.testing.assert_allclose(residuals.dSw_dpc(pc), fd, rtol=1e-6)
    assert residuals.dSw_dpc(-5.0) == 0.0  # saturated branch


def test_rel_perm_values():
    assert residuals.rel_perm_water(1.0) == pytest.approx(1.0)
    assert residuals.rel_perm_water(0.9) == pytest.approx(0.78)
    assert residuals.rel_perm_gas(1.0) == 1e-4       # floored at S_e = 1
    assert residuals.rel_perm_gas(0.2) == pytest.approx(1.0)  # dry endpoint
    # midpoint spot value of the Brooks-Corey formula
    S_e = (0.6 - 0.2) / 0.8
    raw = (1 - S_e) ** 2 * (1 - S_e ** (5.0 / 3.0))
    assert residuals.rel_perm_gas(0.6) == pytest.approx(raw, rel=1e-12)


def test_liakopoulos_bundle_both_directions():
    p_c, k_rw, k_rg, slope = residuals.liakopoulos_constitutive(0.95)
    S_w, k_rw2, k_rg2, slope2 = residuals.liakopoulos_constitutive(
        p_c, from_pc=True)
    assert S_w == pytest.approx(0.95, abs=1e-12)
    assert k_rw2 == pytest.approx(k_rw, abs=1e-12)
    assert k_rg2 == pytest.approx(k_rg, abs=1e-12)
    assert slope2 == pytest.approx(slope, rel=1e-10)
    assert slope < 0


def test_constitutive_state_clamps_and_masks():
    p_star = 9806.0
    # saturated, unsaturated, and unphysically deep drawdown
    pc_bar = np.array([-0.5, 0.4, 50.0])
    con = residuals.constitutive_state(pc_bar, p_star, clamp_warn=False)
    s = val(con.S_w)
    assert s[0] == 1.0
    assert 0.2 < s[1] < 1.0
    assert s[2] == pytest.approx(0.2)           # clamped at residual
    assert val(con.dSw_dpc)[0] == 0.0           # saturated branch
    assert val(con.dSw_dpc)[2] == 0.0           # masked on the clamp
    assert val(con.k_rw)[2] == pytest.approx(1e-4)   # floored
    assert con.dkrw_dSw[2] == 0.0               # no chain term through floor
    assert val(con.k_rg)[0] == pytest.approx(1e-4)   # floored when saturated
    assert con.dkrg_dSw[0] == 0.0
    assert con.dkrw_dSw[1] == pytest.approx(2.2)
    np.testing.assert_allclose(val(con.S_n), 1.0 - s, atol=1e-15)


def test_constitutive_state_grads_flow_to_pc():
    # d(S_w)/d(pc_bar) through the tape equals p* times the analytic slope
    p_star = 9806.0
    v = tape.Var(np.array([0.3]))
    con = residuals.constitutive_state(v, p_star, clamp_warn=False)
    g = tape.backward(tape.vsum(con.S_w), [v])[id(v)][0]
    assert g == pytest.approx(
        residuals.dSw_dpc(0.3 * p_star) * p_star, rel=1e-12)


# ---------------------------------------------------------------------------
# two-phase mass residuals
# ---------------------------------------------------------------------------

def two_phase_setup():
    phys = problems.drainage_physical()
    dimless = nondim.derive_two_phase(phys, S_w=1.0)
    return phys, dimless


def test_two_phase_uniform_state_is_source_free():
    phys, dimless = two_phase_setup()
    jets = {"p_w": jet(np.full(4, 0.3)), "p_c": jet(np.full(4, -0.1))}
    r_w, r_n = residuals.two_phase_mass_residuals(
        jets, phys, dimless, np.zeros(4), "stress_split")
    np.testing.assert_allclose(r_w.data, 0.0, atol=1e-12)
    np.testing.assert_allclose(r_n.data, 0.0, atol=1e-12)
    # and sources just shift the residual
    r_w2, _ = residuals.two_phase_mass_residuals(
        jets, phys, dimless, np.zeros(4), "stress_split", f_w=1.5)
    np.testing.assert_allclose(r_w2.data, -1.5, atol=1e-12)


def test_two_phase_storage_hand_worked():
    """p_w = p_c = t on an unsaturated state: only storage terms survive."""
    phys, dimless = two_phase_setup()
    pc0 = 0.4  # dimensionless capillary pressure level
    n = 3
    p_w = jet(np.full(n, 0.1), grad=[[0, 0, 1.0]])
    p_c = jet(np.full(n, pc0), grad=[[0, 0, 1.0]])
    con = residuals.constitutive_state(np.full(n, pc0), phys.p_star,
                                       clamp_warn=False)
    r_w, r_n = residuals.two_phase_mass_residuals(
        {"p_w": p_w, "p_c": p_c}, phys, dimless, np.zeros(n), "strain_split",
        con=con)
    S_w = val(con.S_w)
    slope = val(con.dSw_dpc)
    N_ww, N_wn, N_nn = residuals.n_matrix_entries(phys, S_w, slope)
    M = dimless.M_bar_star
    np.testing.assert_allclose(r_w.data, M * (N_ww + 2 * N_wn), rtol=1e-12)
    np.testing.assert_allclose(r_n.data, M * (N_wn + 2 * N_nn), rtol=1e-12)


def test_two_phase_split_mode_equivalence():
    """Stress- and strain-split residuals agree when the coupling rates are
    related by the volumetric constitutive identity."""
    rng = np.random.default_rng(11)
    phys, dimless = two_phase_setup()
    pts = rng.uniform(0, 1, (24, 3))
    p_w = poly_jet(pts, random_coeffs(rng))
    base = random_coeffs(rng)
    base["1"] = 0.45  # keep p_c in the unsaturated, unclamped band
    for k in base:
        if k != "1":
            base[k] *= 0.05
    p_c = poly_jet(pts, base)
    jets = {"p_w": p_w, "p_c": p_c}
    con = residuals.constitutive_state(p_c.val.data, phys.p_star,
                                       clamp_warn=False)
    eps_rate = rng.uniform(-1, 1, 24)
    S_w, S_n = val(con.S_w), val(con.S_n)
    dpw = p_w.d(2).data
    dpn = dpw + p_c.d(2).data
    sigma_rate = eps_rate - phys.b * (S_w * dpw + S_n * dpn)
    r_w_e, r_n_e = residuals.two_phase_mass_residuals(
        jets, phys, dimless, eps_rate, "strain_split", con=con)
    r_w_s, r_n_s = residuals.two_phase_mass_residuals(
        jets, phys, dimless, sigma_rate, "stress_split", con=con)
    np.testing.assert_allclose(r_w_s.data, r_w_e.data, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(r_n_s.data, r_n_e.data, rtol=1e-9, atol=1e-9)


def test_two_phase_rejects_bad_mode():
    phys, dimless = two_phase_setup()
    jets = {"p_w": zero_jet(), "p_c": zero_jet()}
    with pytest.raises(ValueError):
        residuals.two_phase_mass_residuals(jets, phys, dimless,
                                           np.zeros(1), "bogus")
    with pytest.raises(ValueError):
        residuals.two_phase_mass_residuals(jets, phys, dimless, None,
                                           "stress_split")


def test_equivalent_pressure_gradient_saturated():
    # saturated: S_n = 0 and slope = 0, so the gradient is just grad p_w
    phys, _ = two_phase_setup()
    p_w = jet(0.5, grad=[[2.0, -1.0, 0.0]])
    p_c = jet(-0.3, grad=[[5.0, 5.0, 0.0]])
    con = residuals.constitutive_state(np.array([-0.3]), phys.p_star,
                                       clamp_warn=False)
    g_x, g_y = residuals.equivalent_pressure_gradient(
        {"p_w": p_w, "p_c": p_c}, con, phys.p_star)
    assert g_x.data[0] == pytest.approx(2.0)
    assert g_y.data[0] == pytest.approx(-1.0)


def test_equivalent_pressure_gradient_unsaturated():
    phys, _ = two_phase_setup()
    pc0 = 0.4
    p_w = jet(0.1, grad=[[1.0, 0.0, 0.0]])
    p_c = jet(pc0, grad=[[2.0, 0.0, 0.0]])
    con = residuals.constitutive_state(np.array([pc0]), phys.p_star,
                                       clamp_warn=False)
    g_x, _ = residuals.equivalent_pressure_gradient(
        {"p_w": p_w, "p_c": p_c}, con, phys.p_star)
    factor = val(con.S_n)[0] - pc0 * val(con.dSw_dpc)[0] * phys.p_star
    assert g_x.data[0] == pytest.approx(1.0 + factor * 2.0, rel=1e-12)
