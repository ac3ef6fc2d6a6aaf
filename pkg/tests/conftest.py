import numpy as np
import pytest

from sourceiter.optics import RefractiveProfile
from sourceiter.physics import FrequencyGrid
from sourceiter.scenario_io import RunConfig
from sourceiter.solver import (AtmosphereScenario, Boundary, KappaModel, RadiationState, build_operators,
                               converge, default_hot_temperature, solve)


def ground_only(**kw):
    return Boundary(c_S=0.0, **kw)


@pytest.fixture(scope="session")
def k05_scenarios():
    """Constant absorption 0.5, ground emission only, without and with the cloud slab."""
    return {eps: AtmosphereScenario.default(eps=eps, boundary=ground_only()) for eps in (0.0, 0.01)}


@pytest.fixture(scope="session")
def k05_solutions(k05_scenarios):
    return {eps: solve(sc) for eps, sc in k05_scenarios.items()}


@pytest.fixture(scope="session")
def small_scenario():
    """Coarse grid for fast property tests."""
    return AtmosphereScenario(
        z_grid=np.linspace(0, 1, 21), freq=FrequencyGrid.geometric(2e-3, 20, 48),
        profile=RefractiveProfile.cloud(0.01), kappa=KappaModel.constant(0.5), boundary=ground_only(),
    )


@pytest.fixture(scope="session")
def small_ops(small_scenario):
    return build_operators(small_scenario)


@pytest.fixture(scope="session")
def case1_solution():
    cfg = RunConfig(case="case1")
    return solve(cfg.scenario(), cfg.solve_options())


def fixed_point(scenario, ops=None):
    """Tightly converged state (independent of the stopping rule)."""
    ops = ops or build_operators(scenario)
    start = RadiationState.isotropic(scenario, default_hot_temperature(scenario))
    return converge(start, scenario, ops, tol=1e-11, t_update="current"), ops


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one acceptance verdict; printed in the terminal summary."""

    def _record(number, name, ok, detail=""):
        ACCEPTANCE[number] = (name, bool(ok), detail)
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{number:2d} {'PASS' if ok else 'FAIL'} {name}: {detail}")
