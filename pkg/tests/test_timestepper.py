import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import ndtr

from mcs_adi.discretization import GridField, build_grid, dirac_initial, model_operators
from mcs_adi.experiments import solve_model
from mcs_adi.fourier import amplification_R, euler_factor, symbols
from mcs_adi.model import ModelParams, exact_solution
from mcs_adi.timestepper import (
    MCSStepper, SchemeParams, integrate, integrate_array, mcs_step, rannacher_startup, theta_admissible,
)

P = ModelParams(rho=-0.7, a1=2.0, a2=3.0)
M = 32


def test_scheme_params_step_count():
    sp = SchemeParams(theta=1 / 3, lam=0.4, h=1 / 16, n0=2)
    assert sp.N == 40
    assert abs(sp.N * sp.dt - 1.0) < 1e-14


def test_scheme_params_rejections():
    with pytest.raises(ValueError):
        SchemeParams(theta=0.0, lam=0.4, h=0.1)
    with pytest.raises(ValueError):
        SchemeParams(theta=0.5, lam=0.3, h=1 / 7)
    with pytest.raises(ValueError):
        SchemeParams(theta=0.5, lam=0.4, h=0.5, n0=6)
    with pytest.raises(ValueError):
        SchemeParams(theta=0.5, lam=0.4, h=0.1, n0=-1)


def test_from_steps():
    sp = SchemeParams.from_steps(0.5, 8, 1 / 6)
    assert sp.N == 8 and sp.dt == pytest.approx(1 / 8)


def test_admissibility_flag():
    assert SchemeParams(theta=1 / 3, lam=0.4, h=0.1).admissible_for(0.95)
    assert not theta_admissible(0.2, 0.0)
    assert not theta_admissible(0.26, 0.9)
    with pytest.raises(ValueError):
        theta_admissible(0.5, 1.0)


def _periodic_setup(rho, a1, a2, c, theta, lam, h=0.25):
    grid = build_grid((0.0, M * h, 0.0, M * h * c), h, c=c, periodic=True)
    mp = ModelParams(rho=rho, a1=a1, a2=a2)
    sp = SchemeParams(theta=theta, lam=lam, h=h, c=c, T=lam * h * 10)
    return grid, mp, sp, MCSStepper(model_operators(grid, mp), theta, sp.dt)


def _modes(m1, m2):
    j = np.arange(M)
    t1, t2 = 2 * np.pi * np.asarray(m1) / M, 2 * np.pi * np.asarray(m2) / M
    modes = np.exp(1j * (t1[:, None, None] * j[None, :, None] + t2[:, None, None] * j[None, None, :]))
    return t1, t2, modes


@given(
    st.floats(-0.95, 0.95), st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([0.5, 1.0, 2.0]),
    st.floats(0.2, 1.5), st.floats(0.1, 1.0), st.integers(0, 2**32 - 1),
)
def test_mcs_step_multiplies_modes_by_R(rho, a1, a2, c, theta, lam, seed):
    grid, mp, sp, stepper = _periodic_setup(rho, a1, a2, c, theta, lam)
    rng = np.random.default_rng(seed)
    m1, m2 = rng.integers(-M // 2 + 1, M // 2 + 1, size=(2, 24))
    t1, t2, e = _modes(m1, m2)
    R = amplification_R(symbols(t1, t2, mp, sp), theta)
    out = stepper.mcs_step(e)
    assert np.max(np.abs(out - R[:, None, None] * e)) <= 1e-12


def test_euler_pair_multiplies_modes_by_squared_factor():
    grid, mp, sp, stepper = _periodic_setup(-0.7, 2.0, 3.0, 1.0, 1 / 3, 0.4)
    m1, m2 = np.meshgrid(np.arange(-4, 5), np.arange(-4, 5))
    t1, t2, e = _modes(m1.ravel(), m2.ravel())
    E = euler_factor(symbols(t1, t2, mp, sp))
    out = stepper.rannacher_startup(e, 1)
    assert np.max(np.abs(out - (E**2)[:, None, None] * e)) <= 1e-12
    assert stepper.linear_solves == 2


def test_linearity():
    g = build_grid((-2, 2), 0.125)
    st_ = MCSStepper(model_operators(g, P), 1 / 3, 0.05)
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=(2, *g.shape))
    u[0], u[-1], u[:, 0], u[:, -1] = 0, 0, 0, 0
    v[0], v[-1], v[:, 0], v[:, -1] = 0, 0, 0, 0
    a, b = 1.7, -0.3
    lhs = st_.mcs_step(a * u + b * v)
    rhs = a * st_.mcs_step(u) + b * st_.mcs_step(v)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(lhs))
    lhs = st_.euler_half_step(a * u + b * v)
    rhs = a * st_.euler_half_step(u) + b * st_.euler_half_step(v)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(lhs))


def _cs_step_dense(u, ops, dt):
    """Craig-Sneyd step written stage by stage with dense matrices."""
    inner = u[1:-1, 1:-1].ravel()
    Z0, Z1, Z2 = (dt * ops.matrix((i,)).toarray() for i in range(3))
    Z = Z0 + Z1 + Z2
    eye = np.eye(len(inner))
    y0 = inner + Z @ inner
    y1 = np.linalg.solve(eye - 0.5 * Z1, y0 - 0.5 * Z1 @ inner)
    y2 = np.linalg.solve(eye - 0.5 * Z2, y1 - 0.5 * Z2 @ inner)
    yt0 = y0 + 0.5 * (Z0 @ y2 - Z0 @ inner)
    yt1 = np.linalg.solve(eye - 0.5 * Z1, yt0 - 0.5 * Z1 @ inner)
    yt2 = np.linalg.solve(eye - 0.5 * Z2, yt1 - 0.5 * Z2 @ inner)
    out = np.zeros_like(u)
    out[1:-1, 1:-1] = yt2.reshape(u[1:-1, 1:-1].shape)
    return out


def test_half_theta_is_craig_sneyd():
    g = build_grid((-1, 1), 0.125, c=2.0)
    ops = model_operators(g, P)
    u = np.random.default_rng(1).normal(size=g.shape)
    u[0], u[-1], u[:, 0], u[:, -1] = 0, 0, 0, 0
    dt = 0.05
    got = MCSStepper(ops, 0.5, dt).mcs_step(u)
    ref = _cs_step_dense(u, ops, dt)
    assert np.max(np.abs(got - ref)) <= 1e-13 * np.max(np.abs(ref))


def test_zero_operator_is_identity():
    g = build_grid((-1, 1), 0.25)
    ops = model_operators(g, ModelParams(rho=0.0, a1=0.0, a2=0.0))
    u = np.random.default_rng(2).normal(size=g.shape)
    st_ = MCSStepper(ops, 1 / 3, 0.0)
    assert np.array_equal(st_.mcs_step(u), u)


def test_boundary_values_are_held():
    g = build_grid((-1, 1), 0.25)
    u = np.random.default_rng(3).normal(size=g.shape)
    st_ = MCSStepper(model_operators(g, P), 1 / 3, 0.1)
    for out in (st_.mcs_step(u), st_.euler_half_step(u)):
        assert np.array_equal(out[0], u[0]) and np.array_equal(out[:, -1], u[:, -1])


def test_startup_without_replaced_steps_is_noop():
    g = build_grid((-1, 1), 0.25)
    sp = SchemeParams(theta=1 / 3, lam=0.4, h=0.25, n0=0)
    f = dirac_initial(g)
    out = rannacher_startup(f, model_operators(g, P), sp)
    assert np.array_equal(out.values, f.values)


def test_two_replaced_steps_take_four_solves():
    g = build_grid((-2, 2), 0.125)
    sp = SchemeParams(theta=1 / 3, lam=0.4, h=0.125, n0=2)
    st_ = MCSStepper(model_operators(g, P), sp.theta, sp.dt)
    integrate(dirac_initial(g), st_.ops, sp, stepper=st_)
    assert st_.linear_solves == 4
    assert st_.report()["mcs_steps"] == sp.N - 2
    assert st_.report()["euler_max_residual"] <= 1e-11


def test_all_euler_run():
    g = build_grid((-2, 2), 0.125)
    ops = model_operators(g, P)
    sp = SchemeParams(theta=1 / 3, lam=1.0, h=0.125, T=0.5, n0=4)
    assert sp.N == 4
    st_ = MCSStepper(ops, sp.theta, sp.dt)
    out = integrate(dirac_initial(g), ops, sp, stepper=st_)
    ref = dirac_initial(g).values
    for _ in range(8):
        ref = st_.euler_half_step(ref)
    assert np.allclose(out.values, ref, rtol=0, atol=1e-13)
    assert st_.steps_taken == 0


def test_zero_data_stays_zero():
    g = build_grid((-2, 2), 0.125)
    sp = SchemeParams(theta=1 / 3, lam=0.4, h=0.125, n0=2)
    out = integrate(GridField(g, g.zeros()), model_operators(g, P), sp)
    assert not out.values.any()


def test_module_level_step_matches_stepper():
    g = build_grid((-1, 1), 0.25)
    ops = model_operators(g, P)
    sp = SchemeParams(theta=1 / 3, lam=0.4, h=0.25)
    f = dirac_initial(g)
    assert np.array_equal(mcs_step(f, ops, sp).values, MCSStepper(ops, sp.theta, sp.dt).mcs_step(f.values))


def test_callback_sees_each_mcs_step():
    g = build_grid((-1, 1), 0.25)
    st_ = MCSStepper(model_operators(g, P), 1 / 3, 0.1)
    seen = []
    integrate_array(dirac_initial(g).values, st_, 10, 2, callback=lambda n, u: seen.append(n))
    assert seen == list(range(3, 11))


def test_mass_is_conserved_away_from_the_boundary():
    # on a box wide enough that nothing reaches the edge, only the zero mode matters
    sp = SchemeParams(theta=1 / 3, lam=0.4, h=1 / 16, n0=2)
    run = solve_model(P, sp, domain=(-12.0, 12.0))
    assert abs(run.mass() - 1) <= 1e-9


def test_dirichlet_leakage_decreases_toward_absorbed_mass(model_run):
    # continuum mass absorbed at y = -10 by time 1 (reflection principle with drift)
    sd = np.sqrt(2.0)
    absorbed = ndtr(-7 / sd) + np.exp(30.0) * ndtr(-13 / sd)
    deficits = [1 - model_run(1 / 3, 0.4, 2, n).mass() for n in (8, 16, 32)]
    assert all(d > 0 for d in deficits)
    assert deficits[0] > deficits[1] > deficits[2] > absorbed


def _smooth_error(h):
    g = build_grid((-10, 10), h)
    X, Y = np.meshgrid(g.x, g.y, indexing="ij")
    u0 = exact_solution(X, Y, 0.25, P)
    dt = 0.4 * h
    st_ = MCSStepper(model_operators(g, P), 1 / 3, dt)
    u = integrate_array(u0, st_, int(round(0.75 / dt)), 0)
    return np.max(np.abs(u - exact_solution(X, Y, 1.0, P)))


def test_smooth_data_second_order():
    errs = [_smooth_error(h) for h in (1 / 8, 1 / 16, 1 / 32)]
    for e1, e2 in zip(errs, errs[1:]):
        assert 3.5 <= e1 / e2 <= 4.5
