"""Continuous model problem: closed-form solution, its Fourier transform and
the correlated Gaussian density used to express the low-wavenumber error.

Model PDE on the whole plane, t in (0, 1]::

    u_t = u_xx + 2 rho u_xy + u_yy + a1 u_x + a2 u_y,   u(x, y, 0) = delta(x) delta(y)

Fourier convention: forward transform with exp(-i kappa x), inverse with
exp(+i kappa x) / (4 pi^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DERIVATIVE_ORDER = 6


@dataclass(frozen=True)
class ModelParams:
    rho: float = -0.7
    a1: float = 2.0
    a2: float = 3.0

    def __post_init__(self):
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got rho={self.rho}")


@dataclass(frozen=True)
class BSParams:
    """Two-asset Black-Scholes data for the cash-or-nothing demo."""

    r: float = 0.05
    sigma1: float = 0.2
    sigma2: float = 0.25
    rho: float = -0.7
    K1: float = 1.0
    K2: float = 1.0
    T: float = 2.0

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("volatilities must be positive")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got rho={self.rho}")
        if self.K1 <= 0 or self.K2 <= 0:
            raise ValueError("strikes must be positive")
        if self.T <= 0:
            raise ValueError("maturity must be positive")

    def model_params(self) -> ModelParams:
        """Drift coefficients of the log-transformed PDE (the -r u term is dropped)."""
        s2 = math.sqrt(2.0)
        return ModelParams(
            rho=self.rho,
            a1=s2 * self.r / self.sigma1 - self.sigma1 / s2,
            a2=s2 * self.r / self.sigma2 - self.sigma2 / s2,
        )


def exact_solution(x, y, t: float, p: ModelParams):
    """Bivariate normal density with mean (-a1 t, -a2 t) and covariance 2t[[1, rho], [rho, 1]]."""
    if t <= 0:
        raise ValueError(f"exact solution needs t > 0, got t={t}")
    rho = p.rho
    one_m = 1.0 - rho * rho
    xs = np.asarray(x, dtype=float) + p.a1 * t
    ys = np.asarray(y, dtype=float) + p.a2 * t
    q = xs * xs + ys * ys - 2.0 * rho * xs * ys
    return np.exp(-q / (4.0 * t * one_m)) / (4.0 * math.pi * t * math.sqrt(one_m))


def exact_fourier(kappa, eta, t: float, p: ModelParams):
    kappa = np.asarray(kappa, dtype=float)
    eta = np.asarray(eta, dtype=float)
    expo = kappa**2 + 2.0 * p.rho * kappa * eta + eta**2 - 1j * (p.a1 * kappa + p.a2 * eta)
    return np.exp(-expo * t)


def phi_rho(x, y, p: ModelParams | float):
    """Standard bivariate normal density with correlation rho."""
    rho = p.rho if isinstance(p, ModelParams) else float(p)
    one_m = 1.0 - rho * rho
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * one_m)) / (
        2.0 * math.pi * math.sqrt(one_m)
    )


@lru_cache(maxsize=None)
def _derivative_polynomial(n1: int, n2: int, rho: float) -> np.ndarray:
    # P[a, b] is the coefficient of x**a y**b; d/dx (P phi) = (P_x - P (x - rho y)/(1 - rho^2)) phi
    one_m = 1.0 - rho * rho
    P = np.zeros((1, 1))
    P[0, 0] = 1.0
    for axis, count in ((0, n1), (1, n2)):
        for _ in range(count):
            P = _differentiate_once(P, axis, rho, one_m)
    P.setflags(write=False)
    return P


def _differentiate_once(P: np.ndarray, axis: int, rho: float, one_m: float) -> np.ndarray:
    nx, ny = P.shape
    out = np.zeros((nx + 1, ny + 1))
    # polynomial derivative along `axis`
    if axis == 0:
        out[: nx - 1, :ny] += P[1:, :] * np.arange(1, nx)[:, None]
        own, other = (1, 0), (0, 1)
    else:
        out[:nx, : ny - 1] += P[:, 1:] * np.arange(1, ny)[None, :]
        own, other = (0, 1), (1, 0)
    # - P * (own - rho * other) / (1 - rho^2)
    out[own[0] : own[0] + nx, own[1] : own[1] + ny] -= P / one_m
    out[other[0] : other[0] + nx, other[1] : other[1] + ny] += rho * P / one_m
    return out


def phi_rho_partial(n1: int, n2: int, x, y, p: ModelParams | float):
    """Exact mixed partial d^(n1+n2) phi_rho / dx^n1 dy^n2 at (x, y)."""
    if n1 < 0 or n2 < 0:
        raise ValueError("derivative orders must be non-negative")
    if n1 + n2 > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"total order {n1 + n2} exceeds {MAX_DERIVATIVE_ORDER}")
    rho = p.rho if isinstance(p, ModelParams) else float(p)
    P = _derivative_polynomial(n1, n2, rho)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.polynomial.polynomial.polyval2d(x, y, P) * phi_rho(x, y, rho)


def bs_to_model(s1, s2, bs: BSParams):
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if np.any(s1 <= 0) or np.any(s2 <= 0):
        raise ValueError("asset prices must be positive")
    return (
        math.sqrt(2.0) * np.log(s1) / bs.sigma1,
        math.sqrt(2.0) * np.log(s2) / bs.sigma2,
    )


def model_to_bs(x, y, bs: BSParams):
    return (
        np.exp(bs.sigma1 * np.asarray(x, dtype=float) / math.sqrt(2.0)),
        np.exp(bs.sigma2 * np.asarray(y, dtype=float) / math.sqrt(2.0)),
    )
