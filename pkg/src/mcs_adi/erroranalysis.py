"""Physical-space error predictors for the model problem.

The total error U_N - u at time 1 is approximated by

    h^2 C_low(x, y) + h^(2 N0 - 2) C_high(j, k)
        [+ h^(2 N0 - 1) (-1)^(N - N0) (C_cs(j, y) + C_cs(x, k))   when theta = 1/2]

C_low is computed twice: by quadrature of its Fourier representation and by
applying a differential operator to the correlated Gaussian density. The two
must agree, which guards both transcriptions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .fourier import expansion_N02, expansion_s2, iota
from .model import ModelParams, exact_fourier, phi_rho_partial
from .quadrature import QuadratureSpec, composite_nodes, refine, refine_anchored
from .timestepper import SchemeParams

__all__ = [
    "ErrorEstimate", "LowWavenumberMismatch", "c_low", "c_low_quadrature", "c_low_operator",
    "c_low_operator_coefficients", "c_high", "c_cs", "c_cs_mirror", "total_error_estimate",
    "estimate_on_grid",
]

AGREEMENT_TOL = 1e-6
SIN2_GUARD = 1e-12


class LowWavenumberMismatch(ArithmeticError):
    def __init__(self, worst: float):
        super().__init__(f"quadrature and operator forms of C_low disagree (relative {worst:.3e})")
        self.worst = worst


@dataclass(frozen=True)
class ErrorEstimate:
    """Predicted error components at one or more gridpoints (arrays broadcast together)."""

    e_low: np.ndarray
    e_high: np.ndarray
    e_cs: np.ndarray
    total: np.ndarray

    @classmethod
    def assemble(cls, e_low, e_high, e_cs) -> "ErrorEstimate":
        e_low, e_high, e_cs = np.broadcast_arrays(
            np.asarray(e_low, float), np.asarray(e_high, float), np.asarray(e_cs, float)
        )
        return cls(e_low, e_high, e_cs, e_low + e_high + e_cs)


# -- C_low: Fourier quadrature -------------------------------------------------

def _low_symbol(kappa, eta, mp, sp):
    return exact_fourier(kappa, eta, 1.0, mp) * (expansion_s2(kappa, eta, mp, sp) + expansion_N02(kappa, eta, mp, sp))


def c_low_quadrature(x, y, mp: ModelParams, sp: SchemeParams, qs: QuadratureSpec = QuadratureSpec(),
                     grid: bool = False, return_result: bool = False):
    """(1/4 pi^2) * double integral of u_hat(., ., 1) (s2 + N02) exp(i kappa x + i eta y).

    With ``grid=True`` the result is evaluated on the tensor grid x (n,) by y (m,)
    and has shape (n, m); otherwise x and y are broadcast pointwise.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not grid:
        x, y = np.broadcast_arrays(x, y)
    R = qs.radius

    def est(panels):
        k, w = composite_nodes(-R, R, panels, qs.order)
        F = (w[:, None] * _low_symbol(k[:, None], k[None, :], mp, sp)) * w[None, :]
        Ex = np.exp(1j * np.multiply.outer(x.ravel(), k))
        Ey = np.exp(1j * np.multiply.outer(y.ravel(), k))
        if grid:
            val = (Ex @ F) @ Ey.T
        else:
            val = np.einsum("pa,pa->p", Ex @ F, Ey)
        return val / (4 * math.pi**2)

    res = refine(est, qs)
    shape = (x.size, y.size) if grid else x.shape
    out = np.asarray(res.value).reshape(shape)
    return (out, res) if return_result else out


# -- C_low: differential-operator form ---------------------------------------

def _pmul(*ops):
    out = ops[0]
    for op in ops[1:]:
        out = convolve2d(out, op)
    return out


def _op(terms: dict[tuple[int, int], float]) -> np.ndarray:
    n = max(a for a, _ in terms) + 1
    m = max(b for _, b in terms) + 1
    P = np.zeros((n, m))
    for (a, b), v in terms.items():
        P[a, b] += v
    return P


def _padd(*ops):
    n = max(o.shape[0] for o in ops)
    m = max(o.shape[1] for o in ops)
    out = np.zeros((n, m))
    for o in ops:
        out[: o.shape[0], : o.shape[1]] += o
    return out


def c_low_operator_coefficients(mp: ModelParams, sp: SchemeParams) -> np.ndarray:
    """Coefficients P[n1, n2] of the operator whose action on phi_rho gives 2 C_low.

    Derivatives are taken with respect to the arguments of phi_rho.
    """
    rho, a1, a2 = mp.rho, mp.a1, mp.a2
    lam, th, c, n0 = sp.lam, sp.theta, sp.c, sp.n0
    c2 = c * c
    r2 = math.sqrt(2.0)
    L = _op({(2, 0): 0.5, (1, 1): rho, (0, 2): 0.5, (1, 0): a1 / r2, (0, 1): a2 / r2})
    Lx = _op({(2, 0): 0.5, (1, 0): a1 / r2})
    Ly = _op({(0, 2): 0.5, (0, 1): a2 / r2})
    spatial = _op({
        (4, 0): 1 / 48, (3, 1): rho / 12, (1, 3): rho * c2 / 12, (0, 4): c2 / 48,
        (3, 0): a1 / (12 * r2), (0, 3): a2 * c2 / (12 * r2),
    })
    inner = _padd(_op({(1, 1): rho / 2}), (0.5 - th) * _padd(Lx, Ly))
    return _padd(
        spatial,
        -(lam**2) * th**2 * _pmul(Lx, Ly, L),
        lam**2 / 12 * _pmul(L, L, L),
        -(lam**2) * _pmul(L, inner, inner),
        n0 * lam**2 / 4 * _pmul(L, L),
    )


def c_low_operator(x, y, mp: ModelParams, sp: SchemeParams):
    """C_low from mixed partials of phi_rho at ((x + a1)/sqrt 2, (y + a2)/sqrt 2)."""
    X = (np.asarray(x, dtype=float) + mp.a1) / math.sqrt(2.0)
    Y = (np.asarray(y, dtype=float) + mp.a2) / math.sqrt(2.0)
    X, Y = np.broadcast_arrays(X, Y)
    P = c_low_operator_coefficients(mp, sp)
    out = np.zeros(X.shape)
    for (n1, n2), coef in np.ndenumerate(P):
        if coef != 0.0:
            out += coef * phi_rho_partial(n1, n2, X, Y, mp)
    return 0.5 * out


def c_low(x, y, mp: ModelParams, sp: SchemeParams, qs: QuadratureSpec = QuadratureSpec(),
          check: bool = True, tol: float = AGREEMENT_TOL, grid: bool = False):
    """C_low by quadrature, cross-checked against the operator form.

    Points whose magnitude is below the quadrature's absolute resolution
    (``qs.rel_tol`` times the peak) are excluded from the relative check.
    Raises ``LowWavenumberMismatch`` when the routes disagree.
    """
    quad, res = c_low_quadrature(x, y, mp, sp, qs, grid=grid, return_result=True)
    if abs(quad.imag).max(initial=0.0) > 1e-10 * max(1.0, abs(quad).max(initial=0.0)):
        raise LowWavenumberMismatch(float(abs(quad.imag).max()))
    quad = quad.real
    if check:
        if grid:
            xx, yy = np.meshgrid(np.asarray(x, float), np.asarray(y, float), indexing="ij")
        else:
            xx, yy = x, y
        ref = c_low_operator(xx, yy, mp, sp)
        floor = max(1e-12, qs.rel_tol * float(np.abs(ref).max(initial=0.0)))
        mask = np.abs(ref) > floor
        if np.any(mask):
            worst = float(np.max(np.abs(quad[mask] - ref[mask]) / np.abs(ref[mask])))
            if worst > tol:
                raise LowWavenumberMismatch(worst)
    return quad


# -- C_high ---------------------------------------------------------------------

def _high_log_integrand(t1, t2, mp: ModelParams, sp: SchemeParams):
    s1 = np.sin(t1 / 2) ** 2
    s2 = np.sin(t2 / 2) ** 2
    io = iota(t1, t2, mp.rho, sp.c)
    prod = s1 * s2
    safe = prod >= SIN2_GUARD
    with np.errstate(divide="ignore", invalid="ignore"):
        logv = -io / (4 * sp.lam**2 * sp.theta**2 * np.where(safe, prod, 1.0))
        if sp.n0:
            logv = logv - 2 * sp.n0 * np.log(2 * sp.lam * np.where(safe, io, 1.0))
    return np.where(safe, logv, -np.inf)


def c_high(j, k, mp: ModelParams, sp: SchemeParams, qs: QuadratureSpec = QuadratureSpec(), grid: bool = False):
    """High-wavenumber constant at index (j, k), integrated over [-pi, pi] x [0, pi].

    ``grid=True`` evaluates on the tensor product of the index vectors.
    """
    j = np.asarray(j, dtype=float)
    k = np.asarray(k, dtype=float)
    if not grid:
        j, k = np.broadcast_arrays(j, k)
    pref = sp.c ** (4 * sp.n0 - 1) / (2 * math.pi**2)

    def est(panels):
        t1, w1 = composite_nodes(-math.pi, math.pi, 2 * panels, qs.order)
        t2, w2 = composite_nodes(0.0, math.pi, panels, qs.order)
        G = np.exp(_high_log_integrand(t1[:, None], t2[None, :], mp, sp))
        G = (w1[:, None] * G) * w2[None, :]
        a = np.multiply.outer(j.ravel(), t1)
        b = np.multiply.outer(k.ravel(), t2)
        ca, sa, cb, sb = np.cos(a), np.sin(a), np.cos(b), np.sin(b)
        if grid:
            val = (ca @ G) @ cb.T - (sa @ G) @ sb.T
        else:
            val = np.einsum("pa,pa->p", ca @ G, cb) - np.einsum("pa,pa->p", sa @ G, sb)
        return pref * val, pref * G.sum()

    res = refine_anchored(est, qs)
    shape = (j.size, k.size) if grid else j.shape
    return np.asarray(res.value).reshape(shape)


# -- C_cs -------------------------------------------------------------------------

def _require_cs(sp: SchemeParams):
    if sp.theta != 0.5:
        raise ValueError(f"the CS terms exist only for theta = 1/2, got {sp.theta}")


def _cs_line(idx, scale: float, num: float, n0: int, qs: QuadratureSpec):
    """Integral over [-pi, pi] of cos(idx t) (2 scale sin^2(t/2))^(-2 n0) exp(-num / sin^2(t/2))."""
    idx = np.asarray(idx, dtype=float)

    def est(panels):
        t, w = composite_nodes(-math.pi, math.pi, panels, qs.order)
        s = np.sin(t / 2) ** 2
        safe = s >= SIN2_GUARD
        ss = np.where(safe, s, 1.0)
        logv = -num / ss - 2 * n0 * np.log(2 * scale * ss)
        g = np.where(safe, np.exp(logv), 0.0) * w
        return np.cos(np.multiply.outer(idx.ravel(), t)) @ g, g.sum()

    return np.asarray(refine_anchored(est, qs).value).reshape(idx.shape)


def _phi1(z):
    return np.exp(-0.5 * np.asarray(z, dtype=float) ** 2) / math.sqrt(2 * math.pi)


def c_cs(j, y, mp: ModelParams, sp: SchemeParams, qs: QuadratureSpec = QuadratureSpec()):
    """CS term driven by large |kappa|: a standard normal factor in y times a line integral in j."""
    _require_cs(sp)
    line = _cs_line(j, sp.lam, 1.0 / sp.lam**2, sp.n0, qs)
    return _phi1((np.asarray(y, dtype=float) + mp.a2) / math.sqrt(2)) * line / (2 * math.sqrt(2) * math.pi)


def c_cs_mirror(x, k, mp: ModelParams, sp: SchemeParams, qs: QuadratureSpec = QuadratureSpec()):
    """CS term driven by large |c eta|; the Euler damping uses lam / c^2 (the y-direction scaling)."""
    _require_cs(sp)
    c = sp.c
    line = _cs_line(k, sp.lam / c**2, c**2 / sp.lam**2, sp.n0, qs)
    return _phi1((np.asarray(x, dtype=float) + mp.a1) / math.sqrt(2)) * line / (2 * math.sqrt(2) * c * math.pi)


# -- assembly -------------------------------------------------------------------

def total_error_estimate(j, k, mp: ModelParams, sp: SchemeParams, qs: QuadratureSpec = QuadratureSpec(),
                         check: bool = True) -> ErrorEstimate:
    """Predicted U_N - u(., ., 1) at grid indices (j, k) (x = j h, y = k c h)."""
    h, c = sp.h, sp.c
    j, k = np.broadcast_arrays(np.asarray(j), np.asarray(k))
    x, y = j * h, k * c * h
    e_low = h**2 * c_low(x, y, mp, sp, qs, check=check)
    e_high = h ** (2 * sp.n0 - 2) * c_high(j, k, mp, sp, qs)
    if sp.theta == 0.5:
        sign = -1.0 if (sp.N - sp.n0) % 2 else 1.0
        e_cs = h ** (2 * sp.n0 - 1) * sign * (c_cs(j, y, mp, sp, qs) + c_cs_mirror(x, k, mp, sp, qs))
    else:
        e_cs = np.zeros(e_low.shape)
    return ErrorEstimate.assemble(e_low, e_high, e_cs)


def estimate_on_grid(j, k, mp: ModelParams, sp: SchemeParams, qs: QuadratureSpec = QuadratureSpec(),
                     check: bool = True, window: int | None = 32) -> ErrorEstimate:
    """Like ``total_error_estimate`` on the tensor grid of index vectors j (n,) and k (m,).

    The index-driven terms (C_high, and C_cs across its strip) decay quickly
    away from index 0; with ``window`` set they are evaluated only for
    |j|, |k| <= window and taken as zero outside.
    """
    h, c = sp.h, sp.c
    j = np.asarray(j)
    k = np.asarray(k)
    x, y = j * h, k * c * h
    e_low = h**2 * c_low(x, y, mp, sp, qs, check=check, grid=True)
    jm = np.abs(j) <= window if window is not None else np.ones(j.shape, bool)
    km = np.abs(k) <= window if window is not None else np.ones(k.shape, bool)
    e_high = np.zeros(e_low.shape)
    if jm.any() and km.any():
        e_high[np.ix_(jm, km)] = h ** (2 * sp.n0 - 2) * c_high(j[jm], k[km], mp, sp, qs, grid=True)
    e_cs = np.zeros(e_low.shape)
    if sp.theta == 0.5:
        sign = -1.0 if (sp.N - sp.n0) % 2 else 1.0
        if jm.any():
            e_cs[jm, :] += c_cs(j[jm][:, None], y[None, :], mp, sp, qs)
        if km.any():
            e_cs[:, km] += c_cs_mirror(x[:, None], k[km][None, :], mp, sp, qs)
        e_cs *= h ** (2 * sp.n0 - 1) * sign
    return ErrorEstimate.assemble(e_low, e_high, e_cs)
