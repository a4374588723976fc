"""MCS time stepping with optional implicit Euler (Rannacher) start-up.

One MCS step for U' = A U with Z = dt A = Z0 + Z1 + Z2::

    Y0  = (I + Z) U
    (I - theta Z_i) Y_i = Y_{i-1} - theta Z_i U,            i = 1, 2
    Yh0 = Y0 + theta Z0 (Y2 - U)
    Yt0 = Yh0 + (1/2 - theta) Z (Y2 - U)
    (I - theta Z_i) Yt_i = Yt_{i-1} - theta Z_i U,          i = 1, 2
    U_new = Yt2

The implicit stages are solved for the increments Y_i - U, which satisfy
(I - theta Z_i)(Y_i - U) = Y_{i-1} - U and vanish on Dirichlet boundaries.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .discretization import GridField, StencilOperators
from .linalg import CyclicTridiagonalFactor, NinePointSolver, TridiagonalFactor

log = logging.getLogger(__name__)

NINE_POINT_TOL = 1e-11


def theta_admissible(theta: float, rho: float) -> bool:
    """theta >= 1/4 and theta > (1 + |rho|)/6."""
    if not abs(rho) < 1.0:
        raise ValueError(f"|rho| must be < 1, got {rho}")
    return theta >= 0.25 and theta > (1.0 + abs(rho)) / 6.0


@dataclass(frozen=True)
class SchemeParams:
    """Time discretization controls; dt = lam * h and N = T / dt must be integral."""

    theta: float
    lam: float
    h: float
    n0: int = 0
    c: float = 1.0
    T: float = 1.0
    N: int = field(init=False)

    def __post_init__(self):
        if self.theta <= 0:
            raise ValueError("theta must be positive")
        if self.lam <= 0 or self.h <= 0 or self.T <= 0:
            raise ValueError("lam, h and T must be positive")
        if self.n0 < 0:
            raise ValueError("n0 must be non-negative")
        ratio = self.T / (self.lam * self.h)
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > 1e-9 * ratio:
            raise ValueError(
                f"N = T/(lam h) = {ratio:.6g} is not a positive integer; "
                f"nearest valid lam is {self.T / (max(n, 1) * self.h):.6g}"
            )
        if self.n0 > n:
            raise ValueError(f"n0={self.n0} exceeds N={n}")
        object.__setattr__(self, "N", n)

    @classmethod
    def from_steps(cls, theta: float, n_steps: int, h: float, n0: int = 0, c: float = 1.0, T: float = 1.0):
        return cls(theta=theta, lam=T / (n_steps * h), h=h, n0=n0, c=c, T=T)

    @property
    def dt(self) -> float:
        return self.T / self.N

    def admissible_for(self, rho: float) -> bool:
        return theta_admissible(self.theta, rho)


class MCSStepper:
    """Owns the factorizations and stage buffers for one operator / time step.

    Single-writer: use one instance per concurrent run.
    """

    def __init__(self, ops: StencilOperators, theta: float, dt: float, nine_point_tol: float = NINE_POINT_TOL):
        self.ops = ops
        self.grid = ops.grid
        self.theta = float(theta)
        self.dt = float(dt)
        self.nine_point_tol = nine_point_tol
        self.periodic = self.grid.periodic
        self._fx = self._line_factor(ops.x_weights(), theta, transpose=True)
        self._fy = self._line_factor(ops.y_weights(), theta, transpose=False)
        self._euler = None
        self.steps_taken = 0

    # -- helpers --------------------------------------------------------------
    def _line_factor(self, weights, weight, transpose):
        nx, ny = self.grid.nx, self.grid.ny
        lo, ce, up = (np.broadcast_to(np.asarray(w, dtype=float), (nx, ny)) for w in weights)
        if transpose:
            lo, ce, up = lo.T, ce.T, up.T
        s = weight * self.dt
        sub, diag, sup = -s * lo, 1.0 - s * ce, -s * up
        if np.all(sub == sub.flat[0]) and np.all(diag == diag.flat[0]) and np.all(sup == sup.flat[0]):
            sub, diag, sup = sub[:1], diag[:1], sup[:1]
        cls = CyclicTridiagonalFactor if self.periodic else TridiagonalFactor
        return cls(sub, diag, sup)

    def _interior(self, u):
        return u if self.periodic else u[..., 1:-1, 1:-1]

    def _embed(self, inner, like):
        if self.periodic:
            return inner
        out = np.zeros(like.shape, dtype=inner.dtype)
        out[..., 1:-1, 1:-1] = inner
        return out

    def solve_x(self, d):
        """(I - theta Z1)^{-1} applied to a field that vanishes on the boundary."""
        return self._embed(self._fx.solve(self._interior(d), axis=-2), d)

    def solve_y(self, d):
        return self._embed(self._fy.solve(self._interior(d)), d)

    def Z(self, u):
        return self.dt * self.ops.apply(u)

    # -- MCS ---------------------------------------------------------------
    def mcs_step(self, u: np.ndarray) -> np.ndarray:
        th = self.theta
        dt = self.dt
        ops = self.ops
        zu = self.Z(u)
        d2 = self.solve_y(self.solve_x(zu))  # Y2 - U
        z0d = dt * ops.apply_A0(d2)
        zd = z0d + dt * ops.apply(d2, parts=(1, 2))
        inc = zu + th * z0d + (0.5 - th) * zd  # Yt0 - U
        self.steps_taken += 1
        return u + self.solve_y(self.solve_x(inc))  # U + (Yt2 - U)

    # -- implicit Euler ------------------------------------------------------
    @property
    def euler_solver(self) -> NinePointSolver:
        if self._euler is None:
            self._euler = self._build_euler()
        return self._euler

    def _build_euler(self):
        from scipy.sparse import identity

        A = self.ops.matrix()
        M = identity(A.shape[0], format="csr") - 0.5 * self.dt * A
        precond = None
        if not self.periodic:
            px = self._line_factor(self.ops.x_weights(), 0.5, transpose=True)
            py = self._line_factor(self.ops.y_weights(), 0.5, transpose=False)
            nx, ny = self.grid.nx, self.grid.ny

            def precond(r):
                return py.solve(px.solve(r.reshape(nx, ny), axis=-2)).ravel()

        return NinePointSolver(M, tol=self.nine_point_tol, precond=precond)

    def euler_half_step(self, u: np.ndarray) -> np.ndarray:
        """Solve (I - Z/2) U_new = U, with U_new equal to U on the boundary."""
        rhs = 0.5 * self.Z(u)
        inner = self._interior(rhs)
        batch = inner.shape[:-2]
        flat = inner.reshape((-1, inner.shape[-2] * inner.shape[-1]))
        sol = self.euler_solver.solve(flat if batch else flat[0])
        sol = np.asarray(sol).reshape(inner.shape)
        return u + self._embed(sol, u)

    def rannacher_startup(self, u: np.ndarray, n0: int) -> np.ndarray:
        for _ in range(2 * n0):
            u = self.euler_half_step(u)
        return u

    @property
    def linear_solves(self) -> int:
        return 0 if self._euler is None else self._euler.stats.solves

    def report(self) -> dict:
        st = self._euler.stats if self._euler is not None else None
        return {
            "mcs_steps": self.steps_taken,
            "euler_solves": 0 if st is None else st.solves,
            "euler_method": "none" if st is None else self._euler.method,
            "euler_iterations": "" if st is None else " ".join(map(str, st.iterations)),
            "euler_max_residual": 0.0 if st is None or not st.residuals else max(st.residuals),
        }


def mcs_step(u: GridField, ops: StencilOperators, sp: SchemeParams) -> GridField:
    stepper = MCSStepper(ops, sp.theta, sp.dt)
    return GridField(u.grid, stepper.mcs_step(u.values))


def rannacher_startup(u: GridField, ops: StencilOperators, sp: SchemeParams) -> GridField:
    stepper = MCSStepper(ops, sp.theta, sp.dt)
    return GridField(u.grid, stepper.rannacher_startup(u.values, min(sp.n0, sp.N)))


def integrate_array(u0: np.ndarray, stepper: MCSStepper, n_steps: int, n0: int, callback=None) -> np.ndarray:
    n_euler = min(n0, n_steps)
    u = stepper.rannacher_startup(u0, n_euler)
    for n in range(n_euler, n_steps):
        u = stepper.mcs_step(u)
        if callback is not None:
            callback(n + 1, u)
    return u


def integrate(u0: GridField, ops: StencilOperators, sp: SchemeParams, stepper: MCSStepper | None = None) -> GridField:
    """Rannacher start-up for the first n0 steps followed by N - n0 MCS steps."""
    if stepper is None:
        stepper = MCSStepper(ops, sp.theta, sp.dt)
    return GridField(u0.grid, integrate_array(u0.values, stepper, sp.N, sp.n0))
