"""Linear solvers used by the time stepper.

* batched Thomas elimination for the one-directional stages (I - theta Z_i),
  with the factorization computed once and reused for every right-hand side;
* a cyclic (periodic) variant via Sherman-Morrison;
* the nine-point system (I - Z/2) of the implicit Euler half steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class ZeroPivotError(ArithmeticError):
    def __init__(self, line: int, position: int):
        super().__init__(f"zero pivot in tridiagonal line {line} at position {position}")
        self.line = line
        self.position = position


class SolverConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@numba.njit(cache=True)
def _thomas_factor(sub, diag, sup):
    nl, n = diag.shape
    inv_denom = np.empty((nl, n))
    cp = np.empty((nl, n))
    for li in range(nl):
        prev = 0.0
        for i in range(n):
            d = diag[li, i] - sub[li, i] * prev
            if d == 0.0:
                return inv_denom, cp, li, i
            inv_denom[li, i] = 1.0 / d
            prev = sup[li, i] / d
            cp[li, i] = prev
    return inv_denom, cp, -1, -1


@numba.njit(cache=True)
def _thomas_solve(sub, inv_denom, cp, rhs, out):
    # rhs, out: (batch, lines, n); coefficients: (lines or 1, n)
    nb, nl, n = rhs.shape
    shared = sub.shape[0] == 1
    for b in range(nb):
        for li in range(nl):
            c = 0 if shared else li
            prev = rhs[b, li, 0] * inv_denom[c, 0]
            out[b, li, 0] = prev
            for i in range(1, n):
                prev = (rhs[b, li, i] - sub[c, i] * prev) * inv_denom[c, i]
                out[b, li, i] = prev
            for i in range(n - 2, -1, -1):
                out[b, li, i] -= cp[c, i] * out[b, li, i + 1]


@numba.njit(cache=True)
def _thomas_solve_cols(sub, inv_denom, cp, rhs, out):
    # systems along the middle axis: rhs, out (batch, n, lines); the inner loop runs over lines
    nb, n, nl = rhs.shape
    shared = sub.shape[0] == 1
    for b in range(nb):
        for li in range(nl):
            c = 0 if shared else li
            out[b, 0, li] = rhs[b, 0, li] * inv_denom[c, 0]
        for i in range(1, n):
            for li in range(nl):
                c = 0 if shared else li
                out[b, i, li] = (rhs[b, i, li] - sub[c, i] * out[b, i - 1, li]) * inv_denom[c, i]
        for i in range(n - 2, -1, -1):
            for li in range(nl):
                c = 0 if shared else li
                out[b, i, li] -= cp[c, i] * out[b, i + 1, li]


class TridiagonalFactor:
    """Factorization of a family of tridiagonal systems, one per line.

    ``sub``, ``diag`` and ``sup`` have shape (lines, n) or (1, n) when all
    lines share the same matrix; ``sub[:, 0]`` and ``sup[:, -1]`` are ignored.
    """

    def __init__(self, sub, diag, sup):
        diag = np.atleast_2d(np.asarray(diag, dtype=float))
        sub = np.broadcast_to(np.atleast_2d(np.asarray(sub, dtype=float)), diag.shape).copy()
        sup = np.broadcast_to(np.atleast_2d(np.asarray(sup, dtype=float)), diag.shape).copy()
        sub[:, 0] = 0.0
        sup[:, -1] = 0.0
        self.sub, self.diag, self.sup = sub, diag, sup
        self.inv_denom, self.cp, line, pos = _thomas_factor(sub, diag, sup)
        if line >= 0:
            raise ZeroPivotError(int(line), int(pos))

    @property
    def n(self) -> int:
        return self.diag.shape[1]

    def solve(self, rhs: np.ndarray, axis: int = -1) -> np.ndarray:
        """Solve along ``axis`` (-1: rhs shape (..., lines, n); -2: (..., n, lines))."""
        rhs = np.asarray(rhs)
        dtype = np.result_type(rhs.dtype, np.float64)
        r3 = np.ascontiguousarray(rhs.reshape((-1,) + rhs.shape[-2:]), dtype=dtype)
        out = np.empty_like(r3)
        if axis in (-1, rhs.ndim - 1):
            _thomas_solve(self.sub, self.inv_denom, self.cp, r3, out)
        elif axis in (-2, rhs.ndim - 2):
            _thomas_solve_cols(self.sub, self.inv_denom, self.cp, r3, out)
        else:
            raise ValueError("axis must be one of the last two")
        return out.reshape(rhs.shape)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[..., 1:] += self.sub[:, 1:] * x[..., :-1]
        y[..., :-1] += self.sup[:, :-1] * x[..., 1:]
        return y


@numba.njit(cache=True)
def _sherman_morrison(y, z, v_last, denom, cols):
    # in place: y -= ((y[0] + v_last y[-1]) / denom) z along each line
    if cols:
        nb, n, nl = y.shape
    else:
        nb, nl, n = y.shape
    shared = z.shape[0] == 1
    for b in range(nb):
        for li in range(nl):
            c = 0 if shared else li
            if cols:
                coef = (y[b, 0, li] + v_last[c] * y[b, n - 1, li]) / denom[c]
                for i in range(n):
                    y[b, i, li] -= coef * z[c, i]
            else:
                coef = (y[b, li, 0] + v_last[c] * y[b, li, n - 1]) / denom[c]
                for i in range(n):
                    y[b, li, i] -= coef * z[c, i]


class CyclicTridiagonalFactor:
    """Periodic tridiagonal systems (corner entries sub[0] and sup[-1])."""

    def __init__(self, sub, diag, sup):
        diag = np.atleast_2d(np.asarray(diag, dtype=float))
        sub = np.broadcast_to(np.atleast_2d(np.asarray(sub, dtype=float)), diag.shape).copy()
        sup = np.broadcast_to(np.atleast_2d(np.asarray(sup, dtype=float)), diag.shape).copy()
        self.sub, self.diag, self.sup = sub, diag, sup
        alpha = sup[:, -1]  # A[n-1, 0]
        beta = sub[:, 0]  # A[0, n-1]
        gamma = -diag[:, 0]
        mod = diag.copy()
        mod[:, 0] -= gamma
        mod[:, -1] -= alpha * beta / gamma
        self.inner = TridiagonalFactor(sub, mod, sup)
        u = np.zeros_like(diag)
        u[:, 0] = gamma
        u[:, -1] = alpha
        self.z = self.inner.solve(u[None])[0]
        self.v_last = beta / gamma
        self.denom = 1.0 + self.z[:, 0] + self.v_last * self.z[:, -1]

    def solve(self, rhs: np.ndarray, axis: int = -1) -> np.ndarray:
        y = self.inner.solve(rhs, axis)
        y3 = y.reshape((-1,) + y.shape[-2:])
        _sherman_morrison(y3, self.z, self.v_last, self.denom, axis in (-2, y.ndim - 2))
        return y


def tridiagonal_solve(sub, diag, sup, rhs) -> np.ndarray:
    """Solve one tridiagonal system by a forward and a backward sweep.

    ``sub[0]`` and ``sup[-1]`` are ignored. Raises ``ZeroPivotError`` if the
    elimination meets a zero pivot (no pivoting is performed).
    """
    fac = TridiagonalFactor(np.asarray(sub)[None], np.asarray(diag)[None], np.asarray(sup)[None])
    return fac.solve(np.asarray(rhs)[None])[0]


@dataclass
class SolveStats:
    solves: int = 0
    iterations: list[int] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)

    def record(self, iterations: int, residual: float):
        self.solves += 1
        self.iterations.append(int(iterations))
        self.residuals.append(float(residual))


class NinePointSolver:
    """Solver for ``M x = b`` with M the assembled nine-point matrix.

    ``method`` is chosen from the system size: a dense inverse for tiny
    systems (the periodic test grids, where right-hand sides come in batches
    of a thousand), sparse LU up to ``DIRECT_LIMIT`` unknowns, and beyond that
    BiCGSTAB preconditioned with the product of the two one-directional
    factors ``precond``. Every solve checks the relative residual against
    ``tol`` and records it in ``stats``.
    """

    DENSE_LIMIT = 2048
    DIRECT_LIMIT = 40_000

    def __init__(self, matrix: sp.spmatrix, tol: float = 1e-11, maxiter: int = 2000,
                 precond=None, method: str | None = None):
        self.matrix = sp.csr_matrix(matrix)
        self.tol = tol
        self.maxiter = maxiter
        self.stats = SolveStats()
        n = self.matrix.shape[0]
        if method is None:
            if n <= self.DENSE_LIMIT:
                method = "dense"
            elif n <= self.DIRECT_LIMIT or precond is None:
                method = "splu"
            else:
                method = "bicgstab"
        if method not in ("dense", "splu", "bicgstab"):
            raise ValueError(f"unknown method {method!r}")
        if method == "bicgstab" and precond is None:
            raise ValueError("bicgstab needs a preconditioner")
        self.method = method
        self._inv = sla.inv(self.matrix.toarray(), check_finite=False) if method == "dense" else None
        self._lu = spla.splu(self.matrix.tocsc()) if method == "splu" else None
        self._precond = precond

    @property
    def direct(self) -> bool:
        return self.method != "bicgstab"

    def _residual(self, x, b) -> float:
        """Largest relative residual over the rows of a batch (or of one vector)."""
        x2, b2 = np.atleast_2d(x), np.atleast_2d(b)
        r = np.linalg.norm(b2 - (self.matrix @ x2.T).T, axis=1)
        bn = np.linalg.norm(b2, axis=1)
        rel = np.where(bn > 0, r / np.where(bn > 0, bn, 1.0), np.linalg.norm(x2, axis=1))
        return float(rel.max())

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve for one right-hand side (1-D) or a batch (2-D, one per row).

        A batch counts as a single solve in ``stats``.
        """
        b = np.asarray(b)
        if not np.any(b):
            self.stats.record(0, 0.0)
            return np.zeros_like(b)
        if self.method == "dense":
            x = self._split(b, lambda r: r @ self._inv.T)
            its = 1
        elif self.method == "splu":
            x = self._lu_solve(b)
            its = 1
        elif b.ndim == 2:
            parts = [self._krylov(row) for row in b]
            x = np.stack([p[0] for p in parts])
            its = max(p[1] for p in parts)
        else:
            x, its = self._krylov(b)
        res = self._residual(x, b)
        if res > self.tol:
            raise SolverConvergenceError("nine-point solve missed its tolerance", res)
        self.stats.record(its, res)
        return x

    @staticmethod
    def _split(b, solve):
        # the matrix is real: solve real and imaginary parts separately
        if np.iscomplexobj(b):
            return solve(np.ascontiguousarray(b.real)) + 1j * solve(np.ascontiguousarray(b.imag))
        return solve(b)

    def _lu_solve(self, b):
        return self._split(b, lambda r: self._lu.solve(np.ascontiguousarray(r.T)).T)

    def _krylov(self, b):
        n = self.matrix.shape[0]
        M = spla.LinearOperator((n, n), matvec=self._precond, dtype=b.dtype)
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.bicgstab(self.matrix, b, rtol=self.tol * 0.5, atol=0.0,
                                maxiter=self.maxiter, M=M, callback=cb)
        if info != 0:
            res = self._residual(x, b)
            if res > self.tol:
                # BiCGSTAB stagnation: fall back to restarted GMRES from the current iterate
                x, info = spla.gmres(self.matrix, b, x0=x, rtol=self.tol * 0.5, atol=0.0,
                                     restart=60, maxiter=self.maxiter, M=M, callback=cb,
                                     callback_type="pr_norm")
        return x, count[0]
