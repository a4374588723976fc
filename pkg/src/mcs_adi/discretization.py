"""Uniform Cartesian grids, grid fields and the central-difference stencils.

Fields are stored as arrays indexed ``[..., j, k]`` (x index first) over the
full grid including the boundary rows; any leading axes are batch axes.
With Dirichlet grids the stencils act on interior points only and return zero
on the boundary rows, so boundary values are never changed by a time step.
Periodic grids (used only by the Fourier-mode test harness) wrap around.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sp

from .model import BSParams, ModelParams

_DIVISIBILITY_RTOL = 1e-12


def _interval_count(length: float, h: float) -> int:
    ratio = length / h
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > _DIVISIBILITY_RTOL * max(1.0, ratio):
        raise ValueError(f"interval of length {length} is not divisible by mesh width {h}")
    return n


@dataclass(frozen=True)
class Grid2D:
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    h1: float
    h2: float
    periodic: bool = False
    # number of mesh intervals in each direction
    mx: int = field(init=False)
    my: int = field(init=False)

    def __post_init__(self):
        if self.h1 <= 0 or self.h2 <= 0:
            raise ValueError("mesh widths must be positive")
        object.__setattr__(self, "mx", _interval_count(self.xmax - self.xmin, self.h1))
        object.__setattr__(self, "my", _interval_count(self.ymax - self.ymin, self.h2))

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape of a field on this grid."""
        if self.periodic:
            return (self.mx, self.my)
        return (self.mx + 1, self.my + 1)

    @property
    def nx(self) -> int:
        """Number of unknowns in x (interior points, or all points when periodic)."""
        return self.mx if self.periodic else self.mx - 1

    @property
    def ny(self) -> int:
        return self.my if self.periodic else self.my - 1

    @property
    def x(self) -> np.ndarray:
        return self.xmin + self.h1 * np.arange(self.shape[0])

    @property
    def y(self) -> np.ndarray:
        return self.ymin + self.h2 * np.arange(self.shape[1])

    @property
    def c(self) -> float:
        return self.h2 / self.h1

    def index_of(self, x: float, y: float) -> tuple[int, int]:
        """Array index of the gridpoint at (x, y); raises if (x, y) is off-grid."""
        fj = (x - self.xmin) / self.h1
        fk = (y - self.ymin) / self.h2
        j, k = int(round(fj)), int(round(fk))
        if abs(fj - j) > 1e-9 or abs(fk - k) > 1e-9:
            raise ValueError(f"({x}, {y}) is not a gridpoint")
        if not (0 <= j < self.shape[0] and 0 <= k < self.shape[1]):
            raise ValueError(f"({x}, {y}) lies outside the grid")
        return j, k

    @property
    def origin_index(self) -> tuple[int, int]:
        return self.index_of(0.0, 0.0)

    def interior(self) -> tuple[slice, slice]:
        if self.periodic:
            return (slice(None), slice(None))
        return (slice(1, -1), slice(1, -1))

    def zeros(self, dtype=float) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)


def build_grid(bounds, h1: float, c: float = 1.0, periodic: bool = False) -> Grid2D:
    """Grid on ``bounds`` = (min, max) for a square domain or (xmin, xmax, ymin, ymax)."""
    if len(bounds) == 2:
        xmin, xmax = bounds
        ymin, ymax = bounds
    else:
        xmin, xmax, ymin, ymax = bounds
    return Grid2D(float(xmin), float(xmax), float(ymin), float(ymax), float(h1), float(c) * float(h1), periodic)


@dataclass
class GridField:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")

    def mass(self) -> float:
        return float(self.grid.h1 * self.grid.h2 * np.sum(self.values.real))

    def to_csv(self, path) -> None:
        X, Y = np.meshgrid(self.grid.x, self.grid.y, indexing="ij")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "value"])
            for xv, yv, v in zip(X.ravel(), Y.ravel(), self.values.real.ravel()):
                w.writerow([f"{xv:.17g}", f"{yv:.17g}", f"{v:.17g}"])

    @classmethod
    def from_csv(cls, path, grid: Grid2D) -> "GridField":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1)
        return cls(grid, data[:, 2].reshape(grid.shape))


class StencilOperators:
    """Stencil operators A0, A1, A2 of a constant- or
    variable-coefficient operator

        A u = d1 u_xx + m u_xy + d2 u_yy + b1 u_x + b2 u_y

    discretised with second-order central differences. Coefficients may be
    scalars or arrays of the interior shape ``(grid.nx, grid.ny)``.
    """

    def __init__(self, grid: Grid2D, d1=1.0, d2=1.0, m=0.0, b1=0.0, b2=0.0):
        self.grid = grid
        ishape = (grid.nx, grid.ny)
        self.d1, self.d2, self.m, self.b1, self.b2 = (
            _coefficient(v, ishape) for v in (d1, d2, m, b1, b2)
        )

    # -- stencil weights ------------------------------------------------
    def x_weights(self):
        """(lower, centre, upper) weights of A1 at interior points."""
        h = self.grid.h1
        return (
            self.d1 / h**2 - self.b1 / (2 * h),
            -2.0 * self.d1 / h**2,
            self.d1 / h**2 + self.b1 / (2 * h),
        )

    def y_weights(self):
        h = self.grid.h2
        return (
            self.d2 / h**2 - self.b2 / (2 * h),
            -2.0 * self.d2 / h**2,
            self.d2 / h**2 + self.b2 / (2 * h),
        )

    def cross_weight(self):
        return self.m / (4.0 * self.grid.h1 * self.grid.h2)

    # -- application ----------------------------------------------------
    def _apply(self, u, parts):
        u = np.asarray(u)
        dtype = np.result_type(u.dtype, np.float64)
        u3 = np.ascontiguousarray(u.reshape((-1,) + u.shape[-2:]), dtype=dtype)
        out = np.zeros_like(u3)
        ishape = (self.grid.nx, self.grid.ny)
        w = [np.broadcast_to(np.asarray(v, dtype=float), ishape)
             for v in (self.cross_weight(), *self.x_weights(), *self.y_weights())]
        _stencil_kernel(u3, out, *w, self.grid.periodic, 0 in parts, 1 in parts, 2 in parts)
        return out.reshape(u.shape)

    def apply_A0(self, u):
        return self._apply(u, (0,))

    def apply_A1(self, u):
        return self._apply(u, (1,))

    def apply_A2(self, u):
        return self._apply(u, (2,))

    def apply(self, u, parts=(0, 1, 2)):
        """Sum of the selected operators (0: A0, 1: A1, 2: A2) applied to u."""
        return self._apply(u, parts)

    # -- sparse assembly --------------------------------------------------
    def matrix(self, parts=(0, 1, 2)) -> sp.csr_matrix:
        """Sparse matrix of the selected operators acting on the unknowns
        (interior points, row-major over (j, k))."""
        nx, ny = self.grid.nx, self.grid.ny
        J, K = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        rows, cols, vals = [], [], []

        def add(weight, dj, dk):
            w = np.broadcast_to(weight, (nx, ny))
            Jn, Kn = J + dj, K + dk
            if self.grid.periodic:
                Jn, Kn = Jn % nx, Kn % ny
                mask = np.ones((nx, ny), dtype=bool)
            else:
                mask = (Jn >= 0) & (Jn < nx) & (Kn >= 0) & (Kn < ny)
            rows.append((J * ny + K)[mask])
            cols.append((Jn * ny + Kn)[mask])
            vals.append(w[mask])

        if 0 in parts:
            cw = self.cross_weight()
            for dj, dk, sgn in ((1, 1, 1.0), (-1, -1, 1.0), (1, -1, -1.0), (-1, 1, -1.0)):
                add(sgn * cw, dj, dk)
        if 1 in parts:
            for w, dj in zip(self.x_weights(), (-1, 0, 1)):
                add(w, dj, 0)
        if 2 in parts:
            for w, dk in zip(self.y_weights(), (-1, 0, 1)):
                add(w, 0, dk)
        n = nx * ny
        return sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()


@numba.njit(cache=True)
def _stencil_kernel(u, out, cw, xl, xc, xu, yl, yc, yu, periodic, use0, use1, use2):
    # u, out: (batch, NJ, NK) over the full grid; weights: (nx, ny) interior arrays
    nb, nj, nk = u.shape
    off = 0 if periodic else 1
    nx, ny = nj - 2 * off, nk - 2 * off
    km = np.empty(ny, dtype=np.int64)
    kp = np.empty(ny, dtype=np.int64)
    for k in range(ny):
        km[k] = (k + off - 1) % nk
        kp[k] = (k + off + 1) % nk
    for b in range(nb):
        for j in range(nx):
            jj = j + off
            jm = (jj - 1) % nj
            jp = (jj + 1) % nj
            for k in range(ny):
                kk = k + off
                acc = u[b, jj, kk] * 0.0
                if use0:
                    acc += cw[j, k] * (u[b, jp, kp[k]] + u[b, jm, km[k]] - u[b, jp, km[k]] - u[b, jm, kp[k]])
                if use1:
                    acc += xl[j, k] * u[b, jm, kk] + xc[j, k] * u[b, jj, kk] + xu[j, k] * u[b, jp, kk]
                if use2:
                    acc += yl[j, k] * u[b, jj, km[k]] + yc[j, k] * u[b, jj, kk] + yu[j, k] * u[b, jj, kp[k]]
                out[b, jj, kk] = acc


def _coefficient(v, ishape):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        return float(arr)
    return np.broadcast_to(arr, ishape).copy()


def model_operators(grid: Grid2D, p: ModelParams) -> StencilOperators:
    """A0 = rho/(2 h1 h2) d2x d2y, A1 = d2x/h1^2 + a1 d2x/(2 h1), A2 likewise."""
    return StencilOperators(grid, d1=1.0, d2=1.0, m=2.0 * p.rho, b1=p.a1, b2=p.a2)


def _check_grid(field: GridField, grid: Grid2D):
    if grid is not None and field.grid != grid:
        raise ValueError("field lives on a different grid")


def apply_A0(field: GridField, p: ModelParams, grid: Grid2D | None = None) -> GridField:
    _check_grid(field, grid)
    return GridField(field.grid, model_operators(field.grid, p).apply_A0(field.values))


def apply_A1(field: GridField, p: ModelParams, grid: Grid2D | None = None) -> GridField:
    _check_grid(field, grid)
    return GridField(field.grid, model_operators(field.grid, p).apply_A1(field.values))


def apply_A2(field: GridField, p: ModelParams, grid: Grid2D | None = None) -> GridField:
    _check_grid(field, grid)
    return GridField(field.grid, model_operators(field.grid, p).apply_A2(field.values))


def dirac_initial(grid: Grid2D) -> GridField:
    """Discrete Dirac delta: 1/(h1 h2) at the origin, zero elsewhere."""
    u = grid.zeros()
    u[grid.origin_index] = 1.0 / (grid.h1 * grid.h2)
    return GridField(grid, u)


# -- Black-Scholes demo (price coordinates) ------------------------------

def bs_grid(bs: BSParams, n_intervals: int = 200, s_max_factor: float = 4.0) -> Grid2D:
    """Square price grid [0, f*K1] x [0, f*K2] with the strike on a gridpoint."""
    g = Grid2D(0.0, s_max_factor * bs.K1, 0.0, s_max_factor * bs.K2,
               s_max_factor * bs.K1 / n_intervals, s_max_factor * bs.K2 / n_intervals)
    g.index_of(bs.K1, bs.K2)
    return g


def cash_or_nothing_initial(grid: Grid2D, bs: BSParams) -> GridField:
    """Indicator payoff 1{s1 >= K1} 1{s2 >= K2} (closed at the strike)."""
    tol = 1e-12
    S1, S2 = np.meshgrid(grid.x, grid.y, indexing="ij")
    return GridField(grid, ((S1 >= bs.K1 - tol) & (S2 >= bs.K2 - tol)).astype(float))


def cross_gamma_dirac_initial(grid: Grid2D, bs: BSParams) -> GridField:
    u = grid.zeros()
    u[grid.index_of(bs.K1, bs.K2)] = 1.0 / (grid.h1 * grid.h2)
    return GridField(grid, u)


def bs_value_operators(grid: Grid2D, bs: BSParams) -> StencilOperators:
    """Operator of the option-value PDE without the -r u term (handled by
    discounting the solution)."""
    S1, S2 = np.meshgrid(grid.x[1:-1], grid.y[1:-1], indexing="ij")
    return StencilOperators(
        grid,
        d1=0.5 * bs.sigma1**2 * S1**2,
        d2=0.5 * bs.sigma2**2 * S2**2,
        m=bs.rho * bs.sigma1 * bs.sigma2 * S1 * S2,
        b1=bs.r * S1,
        b2=bs.r * S2,
    )


def bs_cross_gamma_operators(grid: Grid2D, bs: BSParams) -> StencilOperators:
    """Operator of the cross-gamma PDE without its reaction term
    (r + rho sigma1 sigma2) Gamma, which is applied as an exact growth factor."""
    S1, S2 = np.meshgrid(grid.x[1:-1], grid.y[1:-1], indexing="ij")
    cross = bs.rho * bs.sigma1 * bs.sigma2
    return StencilOperators(
        grid,
        d1=0.5 * bs.sigma1**2 * S1**2,
        d2=0.5 * bs.sigma2**2 * S2**2,
        m=cross * S1 * S2,
        b1=(bs.r + bs.sigma1**2 + cross) * S1,
        b2=(bs.r + bs.sigma2**2 + cross) * S2,
    )


def bs_cross_gamma_rate(bs: BSParams) -> float:
    return bs.r + bs.rho * bs.sigma1 * bs.sigma2


def max_norm(u: np.ndarray) -> float:
    return float(np.max(np.abs(u))) if u.size else 0.0


__all__ = [
    "Grid2D", "GridField", "StencilOperators", "build_grid", "model_operators",
    "apply_A0", "apply_A1", "apply_A2", "dirac_initial", "bs_grid",
    "cash_or_nothing_initial", "cross_gamma_dirac_initial", "bs_value_operators",
    "bs_cross_gamma_operators", "bs_cross_gamma_rate", "max_norm",
]
