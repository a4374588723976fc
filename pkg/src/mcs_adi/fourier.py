"""Von Neumann analysis of the fully discrete scheme on the unbounded grid.

Angles theta1 = kappa h1, theta2 = eta h2 live in [-pi, pi]. All functions
broadcast over array arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import ModelParams
from .timestepper import SchemeParams, theta_admissible

__all__ = [
    "FourierPoint", "FourierSymbols", "Region", "symbols", "symbols_from_wavenumbers",
    "amplification_R", "euler_factor", "numerical_fourier_UN", "log_numerical_fourier_UN",
    "expansion_s0", "expansion_s2", "expansion_N02", "iota", "classify_region",
    "mcs_scalar_ratio", "mcs_scalar_stable", "region4_modulus", "theta_admissible",
]


@dataclass(frozen=True)
class FourierPoint:
    theta1: float
    theta2: float

    def __post_init__(self):
        if abs(self.theta1) > math.pi or abs(self.theta2) > math.pi:
            raise ValueError("Fourier angles must lie in [-pi, pi]")

    @classmethod
    def from_wavenumbers(cls, kappa: float, eta: float, h: float, c: float = 1.0) -> "FourierPoint":
        return cls(kappa * h, eta * c * h)


@dataclass(frozen=True)
class FourierSymbols:
    z0: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    z: np.ndarray
    p: np.ndarray


def symbols(theta1, theta2, mp: ModelParams, sp: SchemeParams) -> FourierSymbols:
    """Multipliers of dt*A0, dt*A1, dt*A2 at the angles (theta1, theta2)."""
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    lam, h, c, th = sp.lam, sp.h, sp.c, sp.theta
    z0 = (-2.0 * mp.rho * lam / (c * h)) * np.sin(t1) * np.sin(t2) + 0j
    z1 = -(4.0 * lam / h) * np.sin(t1 / 2) ** 2 + 1j * mp.a1 * lam * np.sin(t1)
    z2 = -(4.0 * lam / (c * c * h)) * np.sin(t2 / 2) ** 2 + 1j * mp.a2 * (lam / c) * np.sin(t2)
    z0, z1, z2 = np.broadcast_arrays(z0, z1, z2)
    return FourierSymbols(z0, z1, z2, z0 + z1 + z2, (1 - th * z1) * (1 - th * z2))


def symbols_from_wavenumbers(kappa, eta, mp: ModelParams, sp: SchemeParams) -> FourierSymbols:
    return symbols(np.asarray(kappa) * sp.h, np.asarray(eta) * sp.c * sp.h, mp, sp)


def _r_minus_one(sym: FourierSymbols, theta: float):
    return sym.z / sym.p + (theta * sym.z0 + (0.5 - theta) * sym.z) * sym.z / sym.p**2


def amplification_R(sym: FourierSymbols, theta: float):
    """R = 1 + z/p + (theta z0 + (1/2 - theta) z) z / p^2."""
    return 1.0 + _r_minus_one(sym, theta)


def euler_factor(sym: FourierSymbols):
    """Amplification of one implicit Euler half step, 1/(1 - z/2)."""
    return 1.0 / (1.0 - 0.5 * sym.z)


def _clog1p(w):
    """Principal log(1 + w) without cancellation for small complex w."""
    w = np.asarray(w, dtype=complex)
    mod = 0.5 * np.log1p(2.0 * w.real + (w.real**2 + w.imag**2))
    arg = np.arctan2(w.imag, 1.0 + w.real)
    return mod + 1j * arg


def log_numerical_fourier_UN(theta1, theta2, mp: ModelParams, sp: SchemeParams):
    """(N - N0) log R + 2 N0 log(1/(1 - z/2)), each log on its principal branch."""
    sym = symbols(theta1, theta2, mp, sp)
    n_mcs = sp.N - min(sp.n0, sp.N)
    n_eul = min(sp.n0, sp.N)
    with np.errstate(divide="ignore"):
        log_r = _clog1p(_r_minus_one(sym, sp.theta))
        log_e = -_clog1p(-0.5 * sym.z)
    out = 2 * n_eul * log_e
    if n_mcs:
        out = out + n_mcs * log_r
    return out


def numerical_fourier_UN(theta1, theta2, mp: ModelParams, sp: SchemeParams):
    """R^(N-N0) (1/(1 - z/2))^(2 N0); exactly 0 where R vanishes."""
    sym = symbols(theta1, theta2, mp, sp)
    R = amplification_R(sym, sp.theta)
    logu = log_numerical_fourier_UN(theta1, theta2, mp, sp)
    n_mcs = sp.N - min(sp.n0, sp.N)
    with np.errstate(under="ignore"):
        val = np.exp(logu)
    if n_mcs:
        val = np.where(R == 0, 0.0, val)
    return val


def numerical_fourier_UN_power(theta1, theta2, mp: ModelParams, sp: SchemeParams):
    """Reference evaluation by repeated multiplication."""
    sym = symbols(theta1, theta2, mp, sp)
    R = amplification_R(sym, sp.theta)
    E = euler_factor(sym)
    n_eul = min(sp.n0, sp.N)
    out = np.ones_like(R)
    for _ in range(sp.N - n_eul):
        out = out * R
    for _ in range(2 * n_eul):
        out = out * E
    return out


# -- low-wavenumber expansion coefficients ---------------------------------

def expansion_s0(kappa, eta, mp: ModelParams):
    k = np.asarray(kappa, dtype=float)
    e = np.asarray(eta, dtype=float)
    return -k * k - 2 * mp.rho * k * e - e * e + 1j * mp.a1 * k + 1j * mp.a2 * e


def expansion_s2(kappa, eta, mp: ModelParams, sp: SchemeParams):
    """Coefficient of h^2 in (1/(lam h)) log R^... (MCS part of log U_N)."""
    k = np.asarray(kappa, dtype=float)
    e = np.asarray(eta, dtype=float)
    rho, a1, a2 = mp.rho, mp.a1, mp.a2
    lam, th, c = sp.lam, sp.theta, sp.c
    c2 = c * c
    s0 = expansion_s0(k, e, mp)
    w1 = -k * k + 1j * a1 * k
    w2 = -e * e + 1j * a2 * e
    spatial = (
        k**4 / 12
        + rho * (k * k + c2 * e * e) * k * e / 3
        + c2 * e**4 / 12
        - 1j * a1 * k**3 / 6
        - 1j * a2 * c2 * e**3 / 6
    )
    mixed = -rho * k * e + (0.5 - th) * (-k * k - e * e + 1j * a1 * k + 1j * a2 * e)
    return (
        spatial
        - lam**2 * th**2 * w1 * w2 * s0
        + lam**2 / 12 * s0**3
        - lam**2 * s0 * mixed**2
    )


def expansion_N02(kappa, eta, mp: ModelParams, sp: SchemeParams):
    """Rannacher contribution (N0 lam^2 / 4) s0^2 to the h^2 coefficient."""
    return 0.25 * sp.n0 * sp.lam**2 * expansion_s0(kappa, eta, mp) ** 2


# -- high-wavenumber quantities --------------------------------------------

def iota(theta1, theta2, rho: float, c: float = 1.0):
    s1, c1 = np.sin(np.asarray(theta1) / 2), np.cos(np.asarray(theta1) / 2)
    s2, c2 = np.sin(np.asarray(theta2) / 2), np.cos(np.asarray(theta2) / 2)
    return c * c * s1 * s1 + 2 * rho * c * c1 * s1 * c2 * s2 + s2 * s2


class Region(str, Enum):
    R1 = "R1"
    R2 = "R2"
    R3 = "R3"
    R4 = "R4"
    R5 = "R5"


LOW_EXPONENT = 1.0 / 3.0
HIGH_EXPONENT = 0.5


def classify_region(kappa, eta, h: float, c: float = 1.0):
    """Label each (kappa, eta) with its Fourier-domain region.

    R1: |kappa|, |c eta| <= h^(-1/3); R3: both > h^(-1/2); R4: only |kappa|
    > h^(-1/2); R5: only |c eta| > h^(-1/2); R2 otherwise. Points on a
    threshold go to the lower-numbered region. Returns a ``Region`` for scalar
    input, an array of labels otherwise.
    """
    k = np.abs(np.asarray(kappa, dtype=float))
    e = np.abs(c * np.asarray(eta, dtype=float))
    lim = math.pi / h * (1 + 1e-12)
    if np.any(k > lim) or np.any(e > lim):
        raise ValueError("wavenumber outside |kappa| h, |c eta| h <= pi")
    low = h ** (-LOW_EXPONENT)
    high = h ** (-HIGH_EXPONENT)
    kb, eb = k > high, e > high
    labels = np.where(
        (k <= low) & (e <= low), "R1",
        np.where(kb & eb, "R3", np.where(kb, "R4", np.where(eb, "R5", "R2"))),
    )
    if labels.ndim == 0:
        return Region(str(labels))
    return labels


# -- scalar stability predicates ---------------------------------------------

def _check_scalar_constraints(z0t, z1t, z2t, rho):
    if z1t > 0 or z2t > 0:
        raise ValueError("need z1 <= 0 and z2 <= 0")
    if abs(z0t) > 2 * abs(rho) * math.sqrt(z1t * z2t) * (1 + 1e-12) + 1e-300:
        raise ValueError("need |z0| <= 2 |rho| sqrt(z1 z2)")
    if not (z1t < 0 or z2t < 0):
        raise ValueError("need z1 < 0 or z2 < 0")


def mcs_scalar_ratio(z0t, z1t, z2t, theta: float):
    """|p^2 + p z + theta z0 z + (1/2 - theta) z^2| / p^2 for real arguments."""
    z0t, z1t, z2t = (np.asarray(v, dtype=float) for v in (z0t, z1t, z2t))
    z = z0t + z1t + z2t
    p = (1 - theta * z1t) * (1 - theta * z2t)
    return np.abs(p * p + p * z + theta * z0t * z + (0.5 - theta) * z * z) / (p * p)


def mcs_scalar_stable(z0t: float, z1t: float, z2t: float, theta: float, rho: float) -> bool:
    """Whether the scalar ratio is below 1, decided on p^2 - |numerator|.

    For a non-negative numerator that margin is -z (p + theta z0 + (1/2 - theta) z),
    which stays accurate when z is tiny and the ratio itself rounds to 1.
    """
    _check_scalar_constraints(z0t, z1t, z2t, rho)
    z = z0t + z1t + z2t
    p = (1 - theta * z1t) * (1 - theta * z2t)
    tail = p + theta * z0t + (0.5 - theta) * z
    num = p * p + z * tail
    margin = -z * tail if num >= 0 else p * p + num
    return bool(margin > 0)


def region4_modulus(z22t, theta: float):
    """Limit of |R| in the one-sided high-wavenumber region."""
    z = np.asarray(z22t, dtype=float)
    if np.any(z < 0):
        raise ValueError("z22t must be non-negative")
    a = (1 + z) ** 2 * theta**2
    return np.abs(a - (2 + z) * theta + 0.5) / a
