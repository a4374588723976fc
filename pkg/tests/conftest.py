import functools

import pytest
from hypothesis import HealthCheck, settings

from mcs_adi.experiments import solve_model
from mcs_adi.model import ModelParams
from mcs_adi.timestepper import SchemeParams

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

MODEL = ModelParams(rho=-0.7, a1=2.0, a2=3.0)


@functools.lru_cache(maxsize=None)
def cached_run(theta: float, lam: float, n0: int, inv_h: int):
    """Model-problem solve on [-10, 10]^2 to T=1, shared by every test module."""
    return solve_model(MODEL, SchemeParams(theta=theta, lam=lam, h=1.0 / inv_h, n0=n0))


@pytest.fixture(scope="session")
def default_model() -> ModelParams:
    return MODEL


@pytest.fixture(scope="session")
def model_run():
    return cached_run


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one verdict line per acceptance criterion; printed at the end of the session."""

    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
