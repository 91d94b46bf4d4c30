"""Conversion between physical parameters and the dimensionless bundles the
residuals consume, for single-phase and two-phase poroelasticity.

Scaling factors x* and p* are supplied per benchmark; u*, eps*, t* and the
coupling number D* follow from them. The drained bulk modulus is derived from
(E, nu) via the standard isotropic relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SinglePhasePhysical:
    E: float                 # Young's modulus, Pa
    nu: float                # Poisson ratio
    b: float                 # Biot coefficient
    M: float                 # Biot modulus, Pa
    k: float                 # intrinsic permeability, m^2
    mu: float                # fluid viscosity, Pa.s
    rho_b: float = 0.0       # bulk density, kg/m^3
    rho_f: float = 0.0       # fluid density, kg/m^3
    g: float = 0.0           # gravity, m/s^2
    d: tuple = (0.0, -1.0)   # unit gravity direction
    sigma0: float = 0.0      # boundary load, Pa (negative = compression)
    x_star: float = 1.0      # length scale, m
    p_star: float = 1.0      # pressure scale, Pa

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValueError(f"nu must be in (0, 0.5), got {self.nu}")
        if not 0.0 < self.b <= 1.0:
            raise ValueError(f"b must be in (0, 1], got {self.b}")
        for name in ("M", "k", "mu", "x_star", "p_star"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SinglePhaseDimless:
    nu_star: float
    b: float
    D_star: float
    N_d: float
    t_star: float            # s
    u_star: float            # m
    eps_star: float
    f_star_scale: float      # multiplies a physical source: mu x*^2 / (k p*)
    K_dr: float              # Pa, kept for redimensionalization


def kdr_from_elastic(E, nu) -> float:
    """Drained bulk modulus of an isotropic solid."""
    if nu >= 0.5:
        raise ValueError(f"nu must be < 0.5, got {nu}")
    return E / (3.0 * (1.0 - 2.0 * nu))


def derive_single_phase(phys: SinglePhasePhysical) -> SinglePhaseDimless:
    K_dr = kdr_from_elastic(phys.E, phys.nu)
    nu_star = (1.0 - 2.0 * phys.nu) / (1.0 + phys.nu)
    storage = phys.b**2 / K_dr + 1.0 / phys.M
    # written with K_dr/M so the incompressible limit M = inf lands on 1/b
    D_star = phys.b / (phys.b**2 + K_dr / phys.M)
    t_star = storage * phys.mu / phys.k * phys.x_star**2
    u_star = phys.p_star / K_dr * phys.x_star
    return SinglePhaseDimless(
        nu_star=nu_star,
        b=phys.b,
        D_star=D_star,
        N_d=phys.rho_b * phys.g * phys.x_star / phys.p_star,
        t_star=t_star,
        u_star=u_star,
        eps_star=u_star / phys.x_star,
        f_star_scale=phys.mu * phys.x_star**2 / (phys.k * phys.p_star),
        K_dr=K_dr,
    )


@dataclass
class TwoPhasePhysical:
    E: float
    nu: float
    b: float
    phi: float               # porosity
    K_s: float               # solid bulk modulus, Pa
    c_w: float               # wetting-phase compressibility, 1/Pa
    c_n: float               # nonwetting-phase compressibility, 1/Pa
    k: float                 # intrinsic permeability, m^2
    mu_w: float              # Pa.s
    mu_n: float              # Pa.s
    rho_s: float
    rho_w: float
    rho_n: float
    g: float = 0.0
    d: tuple = (0.0, -1.0)
    S_rw: float = 0.0        # connate wetting saturation
    lambda_pore: float = 3.0  # Brooks-Corey pore-size index
    x_star: float = 1.0
    p_star: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValueError(f"nu must be in (0, 0.5), got {self.nu}")
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"phi must be in (0, 1), got {self.phi}")

    @property
    def mu(self) -> float:
        return self.mu_w + self.mu_n

    @property
    def rho(self) -> float:
        """Reference density used in the gravity number N_d."""
        return (1.0 - self.phi) * self.rho_s + 0.5 * self.phi * (self.rho_w + self.rho_n)

    def rho_bulk(self, S_w) -> float:
        return ((1.0 - self.phi) * self.rho_s
                + self.phi * S_w * self.rho_w
                + self.phi * (1.0 - S_w) * self.rho_n)


@dataclass
class TwoPhaseDimless:
    M_bar_inv: float         # 1/Mbar, 1/Pa
    M_bar_star_inv: float    # 1/Mbar*, 1/Pa
    t_star: float            # s
    D_w_star: float          # at the reference saturation
    D_n_star: float
    N_d: float
    u_star: float
    eps_star: float
    f_star_scale: float
    nu_star: float
    b: float
    K_dr: float

    @property
    def M_bar_star(self) -> float:
        return 1.0 / self.M_bar_star_inv


def derive_two_phase(phys: TwoPhasePhysical, S_w: float) -> TwoPhaseDimless:
    """Dimensionless bundle evaluated at a reference saturation (the initial
    state fixes t* and Mbar*; the residuals use local saturations on top)."""
    if not phys.S_rw <= S_w <= 1.0:
        raise ValueError(f"S_w={S_w} outside [{phys.S_rw}, 1]")
    K_dr = kdr_from_elastic(phys.E, phys.nu)
    S_n = 1.0 - S_w
    m_inv = (phys.phi * S_w * phys.c_w + phys.phi * S_n * phys.c_n
             + (phys.b - phys.phi) / phys.K_s)
    m_star_inv = m_inv + phys.b**2 / K_dr
    m_star = 1.0 / m_star_inv
    t_star = phys.mu * phys.x_star**2 / (phys.k * m_star)
    u_star = phys.p_star / K_dr * phys.x_star
    return TwoPhaseDimless(
        M_bar_inv=m_inv,
        M_bar_star_inv=m_star_inv,
        t_star=t_star,
        D_w_star=S_w * phys.b * m_star / K_dr,
        D_n_star=S_n * phys.b * m_star / K_dr,
        N_d=phys.x_star * phys.rho * phys.g / phys.p_star,
        u_star=u_star,
        eps_star=u_star / phys.x_star,
        f_star_scale=phys.mu * phys.x_star**2 / (phys.k * phys.p_star),
        nu_star=(1.0 - 2.0 * phys.nu) / (1.0 + phys.nu),
        b=phys.b,
        K_dr=K_dr,
    )


def n_matrix(phys: TwoPhasePhysical, S_w, dSw_dpc):
    """Inverse Biot modulus matrix of the two-phase system, ordered
    (wetting, nonwetting). Accepts scalars or arrays. dSw_dpc is the slope of
    the saturation-capillary pressure relation, physically <= 0."""
    K_dr = kdr_from_elastic(phys.E, phys.nu)
    N = (phys.b - phys.phi) * (1.0 - phys.b) / K_dr
    S_n = 1.0 - S_w
    N_ww = -phys.phi * dSw_dpc + phys.phi * S_w * phys.c_w + S_w**2 * N
    N_nn = -phys.phi * dSw_dpc + phys.phi * S_n * phys.c_n + S_n**2 * N
    N_wn = phys.phi * dSw_dpc + S_n * S_w * N
    return np.array([[N_ww, N_wn], [N_wn, N_nn]])
