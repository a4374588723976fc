import math

import numpy as np
import pytest

from mcs_adi.config import parse_config
from mcs_adi.experiments import (
    BSDemoRun, oscillation_metric, run_bs_demo, run_convergence, run_estimate, run_fourier_map, solve_model,
)
from mcs_adi.discretization import build_grid
from mcs_adi.model import ModelParams
from mcs_adi.timestepper import SchemeParams

P = ModelParams(rho=-0.7, a1=2.0, a2=3.0)


@pytest.fixture(scope="module")
def bs_runs():
    cfg = parse_config({"bs": {"intervals": 200, "s_max": 4.0, "steps": 8}})
    return run_bs_demo(cfg, n0=2), run_bs_demo(cfg, n0=0)


def test_convergence_rows():
    cfg = parse_config({"mesh": {"inv_h": [4, 8, 16]}})
    rows = run_convergence(cfg)
    assert [r["inv_h"] for r in rows] == [4, 8, 16]
    assert all(r["status"] == "ok" for r in rows)
    assert math.isnan(rows[0]["order"])
    assert rows[2]["order"] == pytest.approx(math.log2(rows[1]["max_error"] / rows[2]["max_error"]))
    assert rows[2]["pred_low_max"] > 0 and rows[2]["pred_cs_max"] == 0


def test_failed_row_is_marked(monkeypatch):
    from mcs_adi import experiments
    from mcs_adi.linalg import SolverConvergenceError

    real = experiments.solve_model

    def flaky(mp, sp, domain):
        if sp.h == 1 / 8:
            raise SolverConvergenceError("stalled", 1e-3)
        return real(mp, sp, domain)

    monkeypatch.setattr(experiments, "solve_model", flaky)
    rows = run_convergence(parse_config({"mesh": {"inv_h": [4, 8, 16]}}), with_prediction=False)
    assert [r["status"] for r in rows][0::2] == ["ok", "ok"]
    assert rows[1]["status"].startswith("failed")
    assert math.isnan(rows[1]["max_error"]) and math.isnan(rows[2]["order"])


def test_fourier_map_center_and_symmetry():
    T1, T2, mod = run_fourier_map(P, SchemeParams(1 / 3, 0.75, 1 / 6), samples=121)
    assert mod[60, 60] == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(mod, mod[::-1, ::-1], rtol=1e-10, atol=0)


@pytest.mark.parametrize("theta", [1 / 3, 0.5, 1.0])
def test_rannacher_damps_the_corner(theta):
    corner = [run_fourier_map(P, SchemeParams(theta, 0.75, 1 / 6, n0), samples=5)[2][-1, -1] for n0 in (0, 2)]
    assert corner[1] < corner[0]


def test_estimate_table_shape():
    cfg = parse_config({"scheme": {"theta": 0.5, "n0": 0}, "estimate": {"max_points": 9}, "mesh": {"inv_h": [4]}})
    rows = run_estimate(cfg, 4)
    assert rows.shape[1] == 8
    assert len(np.unique(rows[:, 0])) <= 9
    assert np.allclose(rows[:, 7], rows[:, 4:7].sum(axis=1), rtol=0, atol=1e-18)


def test_model_run_bookkeeping():
    run = solve_model(P, SchemeParams(1 / 3, 0.4, 1 / 4, 2))
    assert run.values.shape == (81, 81)
    assert run.error_at(0.0, 0.0) == run.error[40, 40]
    assert run.max_error == np.max(np.abs(run.interior_error))
    assert run.report["euler_solves"] == 4


def test_bs_value_bounded(bs_runs):
    for run in bs_runs:
        assert run.value.max() <= 1 + 1e-8
        # the scheme is not monotone, so a tiny undershoot near the kink is expected
        assert run.value.min() >= -1e-4


def test_bs_deep_in_the_money(bs_runs):
    run = bs_runs[0]
    j, k = run.grid.index_of(3.0, 3.0)
    assert run.value[j, k] == pytest.approx(math.exp(-0.05 * 2.0), rel=0.02)


def test_bs_rannacher_smoothing(bs_runs):
    with_n0, without = bs_runs
    assert with_n0.oscillation() <= 0.1 * without.oscillation()


def test_oscillation_metric_on_known_field():
    g = build_grid((0, 4, 0, 4), 1.0)
    f = np.zeros(g.shape)
    f[2, 2] = 1.0
    assert oscillation_metric(f, g, (2.0, 2.0)) == 4.0
    run = BSDemoRun(g, 0, f, f, {}, (2.0, 2.0))
    assert run.oscillation() == 4.0
