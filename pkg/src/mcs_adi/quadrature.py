"""Composite Gauss-Legendre quadrature with panel doubling."""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np


class QuadratureError(RuntimeError):
    def __init__(self, message: str, delta: float):
        super().__init__(f"{message} (last relative change {delta:.3e})")
        self.delta = delta


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite rule: ``order`` Gauss points on each of ``panels`` equal panels.

    The panel count doubles until two successive estimates differ by less than
    ``rel_tol`` (relative to the largest magnitude of the estimate).
    ``radius`` truncates integrals over the whole line to [-radius, radius].
    """

    order: int = 16
    panels: int = 8
    max_panels: int = 2048
    rel_tol: float = 1e-8
    radius: float = 12.0

    def __post_init__(self):
        if self.order < 1 or self.panels < 1 or self.max_panels < self.panels:
            raise ValueError("invalid panel/order settings")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def with_(self, **kw) -> "QuadratureSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class QuadResult:
    value: np.ndarray | float | complex
    delta: float
    panels: int


@lru_cache(maxsize=32)
def _gauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def composite_nodes(a: float, b: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite rule on [a, b]."""
    x, w = _gauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def refine(estimate: Callable[[int], np.ndarray], spec: QuadratureSpec) -> QuadResult:
    """Double the panel count until ``estimate(panels)`` settles.

    ``estimate`` may return a scalar or an array; convergence is measured by
    the largest change relative to the largest magnitude.
    """
    panels = spec.panels
    prev = np.asarray(estimate(panels))
    delta = np.inf
    while panels < spec.max_panels:
        panels *= 2
        cur = np.asarray(estimate(panels))
        scale = float(np.max(np.abs(cur))) if cur.size else 0.0
        change = float(np.max(np.abs(cur - prev))) if cur.size else 0.0
        delta = change / scale if scale > 0 else change
        if delta < spec.rel_tol or (scale == 0.0 and change == 0.0):
            return QuadResult(cur[()] if cur.ndim == 0 else cur, delta, panels)
        prev = cur
    raise QuadratureError(f"no convergence with {panels} panels", delta)


def refine_anchored(estimate: Callable[[int], tuple[np.ndarray, float]], spec: QuadratureSpec) -> QuadResult:
    """Like ``refine`` for oscillatory integrals.

    ``estimate`` returns the values and the integral of the integrand's modulus.
    Changes are then measured against that modulus integral, so indices whose
    value cancels to nearly zero still converge.
    """
    shape = []

    def est(panels):
        val, mass = estimate(panels)
        val = np.asarray(val)
        shape[:] = [val.shape]
        return np.append(val.ravel(), mass)

    res = refine(est, spec)
    val = res.value[:-1].reshape(shape[0])
    return QuadResult(val[()] if val.ndim == 0 else val, res.delta, res.panels)


def integrate_1d(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, spec: QuadratureSpec) -> QuadResult:
    """Integrate f over [a, b]; f maps nodes (n,) to values (n, ...)."""

    def est(panels):
        x, w = composite_nodes(a, b, panels, spec.order)
        return np.tensordot(w, f(x), axes=(0, 0))

    return refine(est, spec)


def integrate_2d(f: Callable[[np.ndarray, np.ndarray], np.ndarray], xa: float, xb: float,
                 ya: float, yb: float, spec: QuadratureSpec) -> QuadResult:
    """Tensor-product rule; f receives broadcastable node arrays (n, 1) and (1, m)."""

    def est(panels):
        x, wx = composite_nodes(xa, xb, panels, spec.order)
        y, wy = composite_nodes(ya, yb, panels, spec.order)
        return wx @ f(x[:, None], y[None, :]) @ wy

    return refine(est, spec)
