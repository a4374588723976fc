"""Experiment drivers behind the CLI: model solves, convergence sweeps,
Fourier maps, error-estimate tables and the two-asset digital option demo."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .discretization import (
    Grid2D, bs_cross_gamma_operators, bs_cross_gamma_rate, bs_grid, bs_value_operators,
    build_grid, cash_or_nothing_initial, cross_gamma_dirac_initial, dirac_initial,
    max_norm, model_operators,
)
from .erroranalysis import ErrorEstimate, estimate_on_grid
from .fourier import numerical_fourier_UN
from .linalg import SolverConvergenceError, ZeroPivotError
from .model import ModelParams, exact_solution
from .quadrature import QuadratureSpec
from .timestepper import MCSStepper, SchemeParams, integrate_array

log = logging.getLogger(__name__)

SOLVER_ERRORS = (SolverConvergenceError, ZeroPivotError, FloatingPointError)


# -- model problem -------------------------------------------------------------

@dataclass
class ModelRun:
    grid: Grid2D
    sp: SchemeParams
    values: np.ndarray
    report: dict
    seconds: float
    mp: ModelParams = field(default_factory=ModelParams)

    @property
    def error(self) -> np.ndarray:
        """U_N - u(., ., 1) over the whole grid (zero-width boundary rows included)."""
        X, Y = np.meshgrid(self.grid.x, self.grid.y, indexing="ij")
        return self.values - exact_solution(X, Y, self.sp.T, self.mp)

    @property
    def interior_error(self) -> np.ndarray:
        return self.error[1:-1, 1:-1]

    @property
    def max_error(self) -> float:
        return max_norm(self.interior_error)

    def error_at(self, x: float, y: float) -> float:
        return float(self.error[self.grid.index_of(x, y)])

    def mass(self) -> float:
        return float(self.grid.h1 * self.grid.h2 * self.values.sum())


def solve_model(mp: ModelParams, sp: SchemeParams, domain=(-10.0, 10.0)) -> ModelRun:
    """Dirac initial data, homogeneous Dirichlet boundary, integrated to time T."""
    grid = build_grid(domain, sp.h, sp.c)
    stepper = MCSStepper(model_operators(grid, mp), sp.theta, sp.dt)
    t0 = time.perf_counter()
    u = integrate_array(dirac_initial(grid).values, stepper, sp.N, sp.n0)
    return ModelRun(grid, sp, u, stepper.report(), time.perf_counter() - t0, mp)


def interior_indices(grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Signed indices j, k (x = j h1, y = k h2) of the interior gridpoints."""
    j = np.rint(grid.x[1:-1] / grid.h1).astype(int)
    k = np.rint(grid.y[1:-1] / grid.h2).astype(int)
    return j, k


def predict(grid: Grid2D, mp: ModelParams, sp: SchemeParams, qs: QuadratureSpec, window: int = 32) -> ErrorEstimate:
    j, k = interior_indices(grid)
    return estimate_on_grid(j, k, mp, sp, qs, window=window)


# -- convergence sweep -----------------------------------------------------------

CONVERGENCE_COLUMNS = [
    ("inv_h", "1/h"),
    ("h", "mesh width h = h1 (h2 = c h)"),
    ("N", "number of time steps, N = 1/(lambda h)"),
    ("theta", "MCS parameter"),
    ("lambda", "dt / h"),
    ("n0", "number of MCS steps replaced by implicit Euler half-step pairs"),
    ("max_error", "max |U_N - u(., ., 1)| over interior gridpoints"),
    ("origin_error", "U_N - u at (0, 0)"),
    ("order", "log2(max_error(2h) / max_error(h)) against the previous row when 1/h doubled, else nan"),
    ("pred_low_max", "max |h^2 C_low| over interior gridpoints"),
    ("pred_high_origin", "h^(2 n0 - 2) C_high(0, 0)"),
    ("pred_cs_max", "max |CS term| over interior gridpoints (0 unless theta = 1/2)"),
    ("pred_total_max", "max |predicted total error| over interior gridpoints"),
    ("pred_total_origin", "predicted total error at (0, 0)"),
    ("seconds", "wall time of the time integration"),
    ("status", "ok, or failed: <reason>"),
]


def run_convergence(cfg: RunConfig, with_prediction: bool = True) -> list[dict]:
    rows: list[dict] = []
    prev: dict | None = None
    for inv_h in cfg.inv_h:
        sp = cfg.scheme_params(inv_h)
        row = {"inv_h": inv_h, "h": sp.h, "N": sp.N, "theta": sp.theta, "lambda": sp.lam, "n0": sp.n0}
        try:
            run = solve_model(cfg.model, sp, cfg.domain)
        except SOLVER_ERRORS as exc:
            log.error("1/h=%s failed: %s", inv_h, exc)
            row.update({k: math.nan for k, _ in CONVERGENCE_COLUMNS if k not in row and k != "status"})
            row["status"] = f"failed: {exc}"
            rows.append(row)
            prev = None
            continue
        row["max_error"] = run.max_error
        row["origin_error"] = run.error_at(0.0, 0.0)
        row["order"] = math.nan
        if prev is not None and inv_h == 2 * prev["inv_h"] and row["max_error"] > 0:
            row["order"] = math.log2(prev["max_error"] / row["max_error"])
        if with_prediction:
            est = predict(run.grid, cfg.model, sp, cfg.quadrature, cfg.estimate.window)
            oj, ok = run.grid.origin_index
            row["pred_low_max"] = max_norm(est.e_low)
            row["pred_high_origin"] = float(est.e_high[oj - 1, ok - 1])
            row["pred_cs_max"] = max_norm(est.e_cs)
            row["pred_total_max"] = max_norm(est.total)
            row["pred_total_origin"] = float(est.total[oj - 1, ok - 1])
        else:
            for key in ("pred_low_max", "pred_high_origin", "pred_cs_max", "pred_total_max", "pred_total_origin"):
                row[key] = math.nan
        row["seconds"] = run.seconds
        row["status"] = "ok"
        log.info("1/h=%s N=%s max error %.3e (%.1fs)", inv_h, sp.N, row["max_error"], run.seconds)
        rows.append(row)
        prev = row
    return rows


# -- Fourier map -------------------------------------------------------------------

FOURIER_COLUMNS = [
    ("theta1", "kappa h1 in [-pi, pi]"),
    ("theta2", "eta h2 in [-pi, pi]"),
    ("modulus", "|U_N hat| at (theta1, theta2)"),
]


def run_fourier_map(mp: ModelParams, sp: SchemeParams, samples: int = 121):
    """|U_N hat| on a uniform samples x samples grid over [-pi, pi]^2."""
    t = np.linspace(-math.pi, math.pi, samples)
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    return T1, T2, np.abs(numerical_fourier_UN(T1, T2, mp, sp))


# -- estimate table ---------------------------------------------------------------

ESTIMATE_COLUMNS = [
    ("j", "x index, x = j h"),
    ("k", "y index, y = k c h"),
    ("x", "x coordinate"),
    ("y", "y coordinate"),
    ("e_low", "h^2 C_low(x, y)"),
    ("e_high", "h^(2 n0 - 2) C_high(j, k)"),
    ("e_cs", "h^(2 n0 - 1) (-1)^(N - n0) (C_cs(j, y) + C_cs(x, k)); 0 unless theta = 1/2"),
    ("total", "e_low + e_high + e_cs"),
]


def _subsample(idx: np.ndarray, max_points: int) -> np.ndarray:
    stride = max(1, math.ceil(len(idx) / max_points))
    keep = idx[idx % stride == 0]
    while len(keep) > max_points:
        stride += 1
        keep = idx[idx % stride == 0]
    return keep


def run_estimate(cfg: RunConfig, inv_h: int) -> np.ndarray:
    """Rows (j, k, x, y, e_low, e_high, e_cs, total) on a subsampled interior grid."""
    sp = cfg.scheme_params(inv_h)
    grid = build_grid(cfg.domain, sp.h, sp.c)
    j, k = interior_indices(grid)
    j = _subsample(j, cfg.estimate.max_points)
    k = _subsample(k, cfg.estimate.max_points)
    est = estimate_on_grid(j, k, cfg.model, sp, cfg.quadrature, window=cfg.estimate.window)
    J, K = np.meshgrid(j, k, indexing="ij")
    return np.column_stack([
        J.ravel(), K.ravel(), J.ravel() * sp.h, K.ravel() * sp.c * sp.h,
        est.e_low.ravel(), est.e_high.ravel(), est.e_cs.ravel(), est.total.ravel(),
    ])


# -- two-asset cash-or-nothing demo ----------------------------------------------

@dataclass
class BSDemoRun:
    grid: Grid2D
    n0: int
    value: np.ndarray
    cross_gamma: np.ndarray
    report: dict
    strike: tuple[float, float] = (1.0, 1.0)

    def oscillation(self) -> float:
        return oscillation_metric(self.cross_gamma, self.grid, self.strike)


def oscillation_metric(field: np.ndarray, grid: Grid2D, point: tuple[float, float]) -> float:
    """Sum of |second differences| along the grid diagonal through ``point``."""
    j0, k0 = grid.index_of(*point)
    off = k0 - j0
    diag = np.diagonal(field, offset=off)
    return float(np.abs(np.diff(diag, 2)).sum())


def run_bs_demo(cfg: RunConfig, n0: int | None = None) -> BSDemoRun:
    """Option value and cross gamma at maturity on the price grid [0, s_max K]^2.

    The value is computed for v = exp(r t) u with payoff Dirichlet data and
    then discounted; the cross gamma is computed without its reaction term
    and multiplied by exp((r + rho sigma1 sigma2) T).
    """
    demo = cfg.bs
    bs = demo.params
    n0 = cfg.scheme.n0 if n0 is None else n0
    grid = bs_grid(bs, demo.intervals, demo.s_max)
    dt = bs.T / demo.steps
    theta = cfg.scheme.theta
    report: dict = {"steps": demo.steps, "dt": dt, "n0": n0, "theta": theta}

    st_v = MCSStepper(bs_value_operators(grid, bs), theta, dt)
    v = integrate_array(cash_or_nothing_initial(grid, bs).values, st_v, demo.steps, n0)
    value = math.exp(-bs.r * bs.T) * v

    st_g = MCSStepper(bs_cross_gamma_operators(grid, bs), theta, dt)
    g = integrate_array(cross_gamma_dirac_initial(grid, bs).values, st_g, demo.steps, n0)
    gamma = math.exp(bs_cross_gamma_rate(bs) * bs.T) * g

    report.update({f"value_{k}": v for k, v in st_v.report().items()})
    report.update({f"gamma_{k}": v for k, v in st_g.report().items()})
    return BSDemoRun(grid, n0, value, gamma, report, (bs.K1, bs.K2))


BS_COLUMNS = [
    ("s1", "price of asset 1"),
    ("s2", "price of asset 2"),
    ("value", "cash-or-nothing option value at maturity T"),
    ("cross_gamma", "cross gamma u_{s1 s2} at maturity T"),
]
