"""Shared fixtures: the shipped paper config, its simulators and calibrated recipes.

Calibrations are expensive, so they run once per session. Acceptance tests
record a verdict line per criterion in ``ACCEPTANCE``; the terminal summary
prints them in order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import pytest

from cczsim.calibration import CalibrationPoint, Simulator, WorkingPointScan, default_times, find_working_point
from cczsim.config import RunConfig, load_config, paper_config_path
from cczsim.gates import CCPhaseMap, GateRecipe, ccphase_map, finish_recipe
from cczsim.metrics import robustness_scan

ACCEPTANCE: dict[int, str] = {}

ACCEPTANCE_LIMITS = {
    "p_return": 0.97,
    "tau": (110.0, 185.0),
    "calibration_seconds": 300.0,
    "fidelity": 0.99,
    "duration": 252.2,
    "cphase_ns": {("Q1", "Q2"): 23.4, ("Q2", "Q3"): 23.5},
    "cphase_rel": 0.30,
    "robust_min": 0.90,
    "robust_seconds": 1200.0,
    "leakage": 0.05,
    "oracle_pop": 0.05,
    "model_fidelity": 0.02,
}


@dataclass
class Calibrated:
    sim: Simulator
    point: CalibrationPoint
    scan: WorkingPointScan
    recipe: GateRecipe
    seconds: float


def grid_kwargs(cfg: RunConfig, sim: Simulator) -> dict:
    cal = cfg.section("calibration")
    return {
        "span": 1e-3 * cal["shift_span_mhz"],
        "points": cal["shift_points"],
        "times": default_times(sim.pulses.ramp_stage1, cal["time_max"], cal["time_points"]),
    }


def calibrate(cfg: RunConfig, model: str, **overrides) -> Calibrated:
    sim = Simulator(cfg.device_spec(model), cfg.pulse_config(model))
    t0 = time.perf_counter()
    point, scan = find_working_point(sim, **{**grid_kwargs(cfg, sim), **overrides})
    recipe = finish_recipe(sim, point)
    return Calibrated(sim, point, scan, recipe, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def paper_cfg() -> RunConfig:
    return load_config(paper_config_path())


@pytest.fixture(scope="session")
def sim(paper_cfg) -> Simulator:
    return Simulator(paper_cfg.effective_spec(), paper_cfg.pulse_config())


@pytest.fixture(scope="session")
def calibrated(paper_cfg) -> Calibrated:
    return calibrate(paper_cfg, "effective")


@pytest.fixture(scope="session")
def recipe(calibrated) -> GateRecipe:
    return calibrated.recipe


@pytest.fixture(scope="session")
def full_calibrated(paper_cfg) -> Calibrated:
    # the five-mode model is ~40x costlier per step; the working point is
    # searched in a narrow window around its dressed anticrossing
    return calibrate(paper_cfg, "full", span=0.006, points=13,
                     times=default_times(paper_cfg.section("pulses")["ramp_stage1"], 320.0, 150))


@dataclass
class Timed:
    value: object
    seconds: float


@pytest.fixture(scope="session")
def robustness(paper_cfg, sim, recipe) -> Timed:
    rob = paper_cfg.section("robustness")
    t0 = time.perf_counter()
    grid = robustness_scan(sim, recipe, tuple(rob["delta_range"]), tuple(rob["zeta_range_mhz"]), tuple(rob["grid"]))
    return Timed(grid, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def cmap(paper_cfg, sim, recipe) -> CCPhaseMap:
    cal = paper_cfg.section("calibration")
    return ccphase_map(sim, recipe.stage1.delta_working, 1e-3 * cal["ccphase_span_mhz"], cal["ccphase_points"])


@pytest.fixture
def record():
    def _record(n: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[n] = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"

    return _record


SLOW_FIXTURES = {"calibrated", "recipe", "full_calibrated", "robustness", "cmap", "chevron"}


def pytest_collection_modifyitems(items):
    for item in items:
        if SLOW_FIXTURES & set(getattr(item, "fixturenames", ())):
            item.add_marker(pytest.mark.slow)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
