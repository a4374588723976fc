import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mcs_adi.discretization import (
    Grid2D, GridField, StencilOperators, apply_A0, apply_A1, apply_A2, bs_grid, build_grid,
    cash_or_nothing_initial, cross_gamma_dirac_initial, dirac_initial, model_operators,
)
from mcs_adi.model import BSParams, ModelParams

P = ModelParams(rho=-0.7, a1=2.0, a2=3.0)


def _field(grid, f):
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    return GridField(grid, f(X, Y))


def test_grid_point_count():
    g = build_grid((-10, 10), 0.25)
    assert g.shape == (81, 81)
    assert (g.nx, g.ny) == (79, 79)
    assert g.h2 == g.h1
    assert g.origin_index == (40, 40)


def test_grid_rejects_non_divisible_width():
    with pytest.raises(ValueError):
        build_grid((-10, 10), 0.3)
    build_grid((-10, 10), 1 / 3)


def test_grid_with_mesh_ratio():
    g = build_grid((-10, 10), 0.25, c=2.0)
    assert g.h2 == 0.5 and g.shape == (81, 41) and g.c == 2.0


def test_off_grid_lookup_rejected():
    g = build_grid((-1, 1), 0.5)
    with pytest.raises(ValueError):
        g.index_of(0.25, 0.0)
    with pytest.raises(ValueError):
        g.index_of(3.0, 0.0)


def test_dirac_requires_origin_on_grid():
    g = Grid2D(-1.0, 2.0, -1.0, 2.0, 0.75, 0.75)
    with pytest.raises(ValueError):
        dirac_initial(g)


@pytest.mark.parametrize("apply", [apply_A0, apply_A1, apply_A2])
def test_constants_are_annihilated(apply):
    g = build_grid((-2, 2), 0.25)
    out = apply(GridField(g, np.full(g.shape, 3.5)), P)
    assert np.max(np.abs(out.values)) < 1e-12


def test_linear_in_x():
    g = build_grid((-2, 2), 0.25)
    u = _field(g, lambda X, Y: X)
    inner = g.interior()
    assert np.allclose(apply_A1(u, P).values[inner], P.a1, atol=1e-12)
    assert np.max(np.abs(apply_A0(u, P).values)) < 1e-12
    assert np.max(np.abs(apply_A2(u, P).values)) < 1e-12


def test_product_xy_gives_twice_rho():
    g = build_grid((-2, 2), 0.125, c=2.0)
    out = apply_A0(_field(g, lambda X, Y: X * Y), P)
    assert np.allclose(out.values[g.interior()], 2 * P.rho, atol=1e-11)


def test_boundary_rows_stay_zero():
    g = build_grid((-2, 2), 0.25)
    out = model_operators(g, P).apply(np.random.default_rng(0).normal(size=g.shape))
    assert not out[0].any() and not out[-1].any() and not out[:, 0].any() and not out[:, -1].any()


def test_mismatched_grid_rejected():
    g1, g2 = build_grid((-2, 2), 0.25), build_grid((-2, 2), 0.5)
    with pytest.raises(ValueError):
        apply_A1(dirac_initial(g1), P, g2)
    with pytest.raises(ValueError):
        GridField(g1, np.zeros(g2.shape))


def _consistency_error(h):
    g = build_grid((-2, 2), h)
    u = _field(g, lambda X, Y: np.sin(X) * np.cos(Y))
    X, Y = np.meshgrid(g.x, g.y, indexing="ij")
    s, c = np.sin(X) * np.cos(Y), np.cos(X) * np.sin(Y)
    exact = -2 * s - 2 * P.rho * c + P.a1 * np.cos(X) * np.cos(Y) - P.a2 * np.sin(X) * np.sin(Y)
    got = model_operators(g, P).apply(u.values)
    inner = g.interior()
    return np.max(np.abs(got[inner] - exact[inner]))


def test_second_order_consistency():
    errs = [_consistency_error(h) for h in (1 / 8, 1 / 16, 1 / 32)]
    for e1, e2 in zip(errs, errs[1:]):
        assert 3.6 <= e1 / e2 <= 4.4


def test_kernel_matches_sparse_matrix():
    g = build_grid((-1, 2), 0.25, c=0.5)
    ops = model_operators(g, P)
    u = np.random.default_rng(3).normal(size=g.shape)
    u[0], u[-1], u[:, 0], u[:, -1] = 0, 0, 0, 0  # matrix acts on unknowns with zero boundary data
    for parts in [(0,), (1,), (2,), (0, 1, 2)]:
        lhs = ops.apply(u, parts)[g.interior()].ravel()
        rhs = ops.matrix(parts) @ u[g.interior()].ravel()
        assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-12)


def test_kernel_batches_and_complex_input():
    g = build_grid((-1, 1), 0.25, periodic=True)
    ops = model_operators(g, P)
    rng = np.random.default_rng(5)
    u = rng.normal(size=(3, *g.shape)) + 1j * rng.normal(size=(3, *g.shape))
    out = ops.apply(u)
    for b in range(3):
        assert np.allclose(out[b], ops.apply(u[b].real) + 1j * ops.apply(u[b].imag), atol=1e-13)


@given(st.floats(-0.95, 0.95))
def test_cross_stencil_matrix_symmetric(rho):
    g = build_grid((-1, 1), 0.25)
    m = model_operators(g, ModelParams(rho=rho, a1=2.0, a2=3.0)).matrix((0,))
    assert abs(m - m.T).max() < 1e-13


def test_diffusion_matrix_symmetric_without_drift():
    g = build_grid((-1, 1), 0.25, c=2.0)
    m = model_operators(g, ModelParams(rho=0.3, a1=0.0, a2=0.0)).matrix((1, 2))
    assert abs(m - m.T).max() < 1e-13


def test_drift_breaks_symmetry():
    g = build_grid((-1, 1), 0.25)
    m = model_operators(g, P).matrix((1,))
    assert abs(m - m.T).max() > 1


def test_dirac_peak_and_mass():
    g = build_grid((-1, 1), 0.1)
    u = dirac_initial(g)
    assert u.values[g.origin_index] == pytest.approx(100.0, rel=1e-12)
    assert np.count_nonzero(u.values) == 1
    assert u.mass() == pytest.approx(1.0, abs=1e-14)


def test_dirac_discrete_fourier_transform_is_one():
    g = build_grid((-2, 2), 0.25)
    u = dirac_initial(g)
    X, Y = np.meshgrid(g.x, g.y, indexing="ij")
    for kappa, eta in [(0.3, -1.2), (4.0, 2.5), (0.0, 0.0)]:
        hat = g.h1 * g.h2 * np.sum(u.values * np.exp(-1j * (kappa * X + eta * Y)))
        assert hat == pytest.approx(1.0, abs=1e-14)


def test_cash_or_nothing_payoff():
    bs = BSParams()
    g = bs_grid(bs, n_intervals=200, s_max_factor=4.0)
    u = cash_or_nothing_initial(g, bs).values
    j, k = g.index_of(bs.K1, bs.K2)
    assert u[j, k] == 1.0
    assert not u[:j, :].any() and not u[:, :k].any()
    assert u[j:, k:].all()


def test_cross_gamma_delta_mass():
    bs = BSParams()
    g = bs_grid(bs, n_intervals=40)
    u = cross_gamma_dirac_initial(g, bs)
    assert u.mass() == pytest.approx(1.0, rel=1e-14)
    assert u.values[g.index_of(bs.K1, bs.K2)] == pytest.approx(1 / (g.h1 * g.h2))


def test_bs_grid_rejects_off_grid_strike():
    with pytest.raises(ValueError):
        bs_grid(BSParams(), n_intervals=200, s_max_factor=3.0)


def test_csv_round_trip(tmp_path):
    g = build_grid((-1, 1), 0.25, c=2.0)
    vals = np.random.default_rng(1).normal(size=g.shape) * 1e-7
    f = GridField(g, vals)
    path = tmp_path / "field.csv"
    f.to_csv(path)
    assert path.read_text().splitlines()[0] == "x,y,value"
    back = GridField.from_csv(path, g)
    assert np.array_equal(back.values, vals)


def test_variable_coefficients_reduce_to_constant_case():
    g = build_grid((-1, 1), 0.25)
    shape = (g.nx, g.ny)
    const = StencilOperators(g, d1=0.7, d2=1.3, m=-0.4, b1=0.2, b2=-0.1)
    var = StencilOperators(g, d1=np.full(shape, 0.7), d2=np.full(shape, 1.3), m=np.full(shape, -0.4),
                           b1=np.full(shape, 0.2), b2=np.full(shape, -0.1))
    u = np.random.default_rng(2).normal(size=g.shape)
    assert np.array_equal(const.apply(u), var.apply(u))
    assert math.isclose(abs(const.matrix() - var.matrix()).max(), 0.0)
