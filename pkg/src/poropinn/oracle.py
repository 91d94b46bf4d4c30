"""Closed-form reference solutions for the consolidation benchmarks.

Mandel: series solution with transcendental roots tan(a) = c*a, loading
applied on the left edge, drainage through the top edge, so pressure and
vertical displacement vary along y and the horizontal displacement along x.

Barry-Mercer: double sine/cosine series for a pulsating point source in the
unit square with zero-pressure, zero-tangential-displacement edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nondim import SinglePhasePhysical, kdr_from_elastic


@dataclass
class MandelDerived:
    B: float                 # Skempton-like coefficient
    nu_u: float              # undrained Poisson ratio
    c_f: float               # consolidation coefficient, m^2/s
    G: float                 # shear modulus, Pa
    roots: np.ndarray        # first positive roots of tan(a) = c*a
    L_x: float = 1.0
    L_y: float = 1.0


def mandel_derived(phys: SinglePhasePhysical, n_roots: int = 200,
                   L_x: float = 1.0, L_y: float = 1.0) -> MandelDerived:
    K_dr = kdr_from_elastic(phys.E, phys.nu)
    B = phys.b * phys.M / (K_dr + phys.b**2 * phys.M)
    bB = phys.b * B
    nu_u = (3.0 * phys.nu + bB * (1.0 - 2.0 * phys.nu)) / (3.0 - bB * (1.0 - 2.0 * phys.nu))
    G = phys.E / (2.0 * (1.0 + phys.nu))
    # classical uniaxial-storage consolidation coefficient; the volumetric
    # variant k/(mu (1/M + b^2/K_dr)) does not satisfy the coupled system
    # (numerically verified: residual ~0.4 of scale vs ~1e-7 with this one)
    c_f = (2.0 * phys.k / phys.mu) * (B**2 * G * (1.0 - phys.nu)
                                      * (1.0 + nu_u)**2) / (
        9.0 * (1.0 - nu_u) * (nu_u - phys.nu))
    roots = mandel_roots(phys.nu, nu_u, n_roots)
    return MandelDerived(B=B, nu_u=nu_u, c_f=c_f, G=G, roots=roots, L_x=L_x, L_y=L_y)


def mandel_roots(nu: float, nu_u: float, count: int) -> np.ndarray:
    """First `count` positive roots of tan(a) = c*a, c = (1-nu)/(nu_u-nu).

    c > 1 guarantees exactly one root in each interval
    ((i-1)*pi, (i-1)*pi + pi/2); bisection refines to ~1e-15 residual.
    """
    if nu_u <= nu:
        raise ValueError(f"need nu_u > nu, got nu={nu}, nu_u={nu_u}")
    c = (1.0 - nu) / (nu_u - nu)
    roots = np.empty(count)
    for i in range(1, count + 1):
        lo = (i - 1) * np.pi
        hi = lo + np.pi / 2.0
        # f = tan(a) - c*a: negative just above lo, +inf just below hi
        lo += 1e-12 if i == 1 else 0.0
        hi -= 1e-12
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.tan(mid) - c * mid < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-16 * max(1.0, hi):
                break
        roots[i - 1] = 0.5 * (lo + hi)
    # Newton polish on the stable form g(a) = sin(a) - c*a*cos(a); the raw
    # tan form loses precision near the bracket's upper end at large a
    for _ in range(3):
        g = np.sin(roots) - c * roots * np.cos(roots)
        dg = (1.0 - c) * np.cos(roots) + c * roots * np.sin(roots)
        roots -= g / dg
    return roots


def mandel_root_residuals(nu: float, nu_u: float, roots) -> np.ndarray:
    """Defining-equation residual per root, in the numerically stable form
    |sin(a) - c*a*cos(a)| / (1 + c*a)."""
    c = (1.0 - nu) / (nu_u - nu)
    return np.abs(np.sin(roots) - c * roots * np.cos(roots)) \
        / (1.0 + c * roots)


def _mandel_series(derived: MandelDerived, t):
    a = derived.roots
    denom = a - np.sin(a) * np.cos(a)
    decay = np.exp(-a[None, :]**2 * derived.c_f * np.asarray(t)[:, None]
                   / derived.L_y**2)
    return a, denom, decay


def mandel_solution(x, y, t, phys: SinglePhasePhysical,
                    derived: MandelDerived, n_terms: int | None = None):
    """Pressure and displacements (p, u, v) at broadcastable x, y, t arrays.

    u is horizontal (varies along x), v vertical and p vary along y. All
    outputs are physical (Pa, m)."""
    x, y, t = np.broadcast_arrays(np.atleast_1d(np.asarray(x, float)),
                                  np.atleast_1d(np.asarray(y, float)),
                                  np.atleast_1d(np.asarray(t, float)))
    shape = x.shape
    x, y, t = x.ravel(), y.ravel(), t.ravel()
    a = derived.roots if n_terms is None else derived.roots[:n_terms]
    denom = a - np.sin(a) * np.cos(a)
    decay = np.exp(-a[None, :]**2 * (derived.c_f * t[:, None]) / derived.L_y**2)
    sig0 = phys.sigma0
    G, nu, nu_u = derived.G, phys.nu, derived.nu_u
    Ly, Lx = derived.L_y, derived.L_x

    cos_ay = np.cos(a[None, :] * y[:, None] / Ly)
    sin_ay = np.sin(a[None, :] * y[:, None] / Ly)
    p = (2.0 * abs(sig0) * derived.B * (1.0 + nu_u) / 3.0) * np.sum(
        (np.sin(a) / denom)[None, :] * (cos_ay - np.cos(a)[None, :]) * decay,
        axis=1)
    s_t = np.sum((np.sin(a) * np.cos(a) / denom)[None, :] * decay, axis=1)
    # v carries a sign flip relative to the printed series: as printed it
    # contracts the free direction under compression and violates the
    # traction-free condition (checked numerically; flipped, sigma_yy == 0)
    v = -((sig0 * y / G) * (nu / 2.0 - nu_u * s_t)
          + (sig0 * Ly / G) * np.sum((np.cos(a) / denom)[None, :] * sin_ay * decay,
                                     axis=1))
    u = (sig0 * (Lx - x) / G) * (-(1.0 - nu) / 2.0 + (1.0 - nu_u) * s_t)
    return p.reshape(shape), u.reshape(shape), v.reshape(shape)


def mandel_strains(y, t, phys: SinglePhasePhysical, derived: MandelDerived,
                   n_terms: int | None = None):
    """Analytic strains (eps_xx(t), eps_yy(y, t)) of the Mandel solution,
    from term-wise differentiation of the displacement series."""
    y, t = np.broadcast_arrays(np.atleast_1d(np.asarray(y, float)),
                               np.atleast_1d(np.asarray(t, float)))
    shape = y.shape
    y, t = y.ravel(), t.ravel()
    a = derived.roots if n_terms is None else derived.roots[:n_terms]
    denom = a - np.sin(a) * np.cos(a)
    decay = np.exp(-a[None, :]**2 * (derived.c_f * t[:, None]) / derived.L_y**2)
    sig0, G, nu, nu_u = phys.sigma0, derived.G, phys.nu, derived.nu_u
    s_t = np.sum((np.sin(a) * np.cos(a) / denom)[None, :] * decay, axis=1)
    eps_xx = (sig0 / G) * ((1.0 - nu) / 2.0 - (1.0 - nu_u) * s_t)
    cos_ay = np.cos(a[None, :] * y[:, None] / derived.L_y)
    eps_yy = -((sig0 / G) * (nu / 2.0 - nu_u * s_t)
               + (sig0 / G) * np.sum((a * np.cos(a) / denom)[None, :] * cos_ay
                                     * decay, axis=1))
    return eps_xx.reshape(shape), eps_yy.reshape(shape)


def mandel_sigma_xx(y, t, phys: SinglePhasePhysical, derived: MandelDerived,
                    n_terms: int | None = None):
    """Total stress in the loading direction, sigma_xx(y, t).

    With a shear-free solution and a traction-free top, sigma_yy vanishes
    identically and sigma_xx = 2G (eps_xx - eps_yy)."""
    eps_xx, eps_yy = mandel_strains(y, t, phys, derived, n_terms)
    return 2.0 * derived.G * (eps_xx - eps_yy)


# -- Barry-Mercer ------------------------------------------------------------


@dataclass
class BarryMercerConfig:
    a: float = 1.0           # domain width, m
    b: float = 1.0           # domain height, m
    x0: float = 0.25         # source location
    y0: float = 0.25
    beta: float = 1.0        # rate parameter E(1-nu)k / ((1+nu)(1-2nu)ab mu)
    n_modes: int = 128       # truncation in each index
    q_modes: int = 128

    def __post_init__(self):
        if not (0.0 < self.x0 < self.a and 0.0 < self.y0 < self.b):
            raise ValueError("source must lie strictly inside the domain")
        if self.n_modes < 1 or self.q_modes < 1:
            raise ValueError("truncation must be >= (1, 1)")


def barry_mercer_beta(E, nu, k, mu, a=1.0, b=1.0) -> float:
    return E * (1.0 - nu) * k / ((1.0 + nu) * (1.0 - 2.0 * nu) * a * b * mu)


def _rect_green(x, y, x0, y0, n_terms=400):
    """Dirichlet Green's function of the Laplacian on the unit square.

    Single eigenfunction sum along one axis with hyperbolic closed form along
    the other; converges exponentially in the separation from the source, so
    the summation axis is chosen per point as the better-separated one.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    swap = np.abs(x - x0) > np.abs(y - y0)
    xs = np.where(swap, y, x)
    ys = np.where(swap, x, y)
    xs0 = np.where(swap, y0, x0)
    ys0 = np.where(swap, x0, y0)
    lam = np.arange(1, n_terms + 1)[None, :] * np.pi
    y_lo = np.minimum(ys, ys0)[:, None]
    y_hi = np.maximum(ys, ys0)[:, None]
    a = lam * y_lo
    b = lam * (1.0 - y_hi)
    # sinh(a) sinh(b) / sinh(lam) with every exponent kept non-positive
    ratio = ((np.exp(a + b - lam) + np.exp(-a - b - lam)
              - np.exp(a - b - lam) - np.exp(b - a - lam))
             / (2.0 * (1.0 - np.exp(-2.0 * lam))))
    terms = (2.0 / lam) * np.sin(lam * xs[:, None]) * np.sin(lam * xs0[:, None])
    return np.sum(terms * ratio, axis=1)


def barry_mercer_solution(x, y, t_hat, config: BarryMercerConfig, elastic):
    """Fields (p, u, v) at points (x, y) and scaled time t_hat = beta*t.

    `elastic` is (E, nu); the pressure carries the physical elastic prefactor,
    displacements are the dimensionless sums of the transformed solution."""
    E, nu = elastic
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    x, y = np.broadcast_arrays(x, y)
    shape = x.shape
    xf, yf = x.ravel() / config.a, y.ravel() / config.b
    n = np.arange(1, config.n_modes + 1)
    q = np.arange(1, config.q_modes + 1)
    lam_n = n * np.pi
    lam_q = q * np.pi
    lam_nq = lam_n[:, None]**2 + lam_q[None, :]**2
    phase = (lam_nq * np.sin(t_hat) - np.cos(t_hat) + np.exp(-lam_nq * t_hat))
    s0 = (-2.0 * np.sin(lam_n[:, None] * config.x0 / config.a)
          * np.sin(lam_q[None, :] * config.y0 / config.b))
    p_hat = s0 / (lam_nq**2 + 1.0) * phase
    u_hat = lam_n[:, None] / lam_nq * p_hat
    v_hat = lam_q[None, :] / lam_nq * p_hat

    sin_nx = np.sin(np.outer(xf, lam_n))
    cos_nx = np.cos(np.outer(xf, lam_n))
    sin_qy = np.sin(np.outer(yf, lam_q))
    cos_qy = np.cos(np.outer(yf, lam_q))
    pref = -4.0 * E * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu))
    # The sin(t_hat) part of p_hat carries a 1/lam_nq tail that converges
    # slowly near the source lines; peel it off as a closed-form Green's
    # function of the Laplacian and sum only the fast remainder.
    p_fast = s0 * (np.exp(-lam_nq * t_hat) - np.cos(t_hat)
                   - np.sin(t_hat) / lam_nq) / (lam_nq**2 + 1.0)
    green = _rect_green(xf, yf, config.x0 / config.a, config.y0 / config.b)
    p = pref * (-0.5 * np.sin(t_hat) * green
                + np.einsum("nq,pn,pq->p", p_fast, sin_nx, sin_qy))
    u = 4.0 * np.einsum("nq,pn,pq->p", u_hat, cos_nx, sin_qy)
    v = 4.0 * np.einsum("nq,pn,pq->p", v_hat, sin_nx, cos_qy)
    return p.reshape(shape), u.reshape(shape), v.reshape(shape)
