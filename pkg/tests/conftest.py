"""Shared data and the two long flow runs, built once per session."""

import time

import pytest

from pcflow.field import TorusChart
from pcflow.flow import FlowControls, FlowState, run
from pcflow.initial_data import DataSpec, make_hermitian_symplectic, make_pluriclosed_rank_one

# derivative monitors are sampled once per this much flow time on the long runs
MONITOR_INTERVAL = 0.01
HORIZON = 0.2


@pytest.fixture(scope="session")
def chart():
    return TorusChart(2, 12)


@pytest.fixture(scope="session")
def rank_one(chart):
    return make_pluriclosed_rank_one(chart, DataSpec(epsilon=0.05))


@pytest.fixture(scope="session")
def hs_pair(chart):
    return make_hermitian_symplectic(chart, DataSpec(kind="hermitian_symplectic", epsilon=0.05))


@pytest.fixture(scope="session")
def rank_one_pkg(rank_one):
    from pcflow.chern import ChernPackage

    return ChernPackage(rank_one)


@pytest.fixture(scope="session")
def rank_one_run(rank_one):
    """The standard run: rank-one data, ε = 0.05, N = 12, horizon 0.2."""
    t0 = time.perf_counter()
    res = run(FlowState(0.0, rank_one), HORIZON,
              FlowControls(monitor_interval=MONITOR_INTERVAL, probe_times=(0.1,)),
              richardson=False)
    res.wall_time = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def hs_run(chart):
    """Hermitian-symplectic run at ε = 0.02 to the same horizon."""
    hs = make_hermitian_symplectic(chart, DataSpec(kind="hermitian_symplectic", epsilon=0.02))
    t0 = time.perf_counter()
    res = run(FlowState(0.0, hs.omega, hs.phi), HORIZON,
              FlowControls(monitor_interval=MONITOR_INTERVAL), richardson=False)
    res.wall_time = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def suite_reports(chart):
    """Static and evolution suite on rank-one data promoted to its HS pair."""
    from pcflow.identities import ALL_CASES, SuiteFlow, run_suite

    t0 = time.perf_counter()
    reports = run_suite(ALL_CASES, chart, DataSpec(epsilon=0.05), SuiteFlow())
    return {r.case: r for r in reports}, time.perf_counter() - t0


@pytest.fixture(scope="session")
def kahler_run(chart):
    """Kähler data (torsion-free) flowed to the horizon; only cheap monitors."""
    from pcflow.initial_data import make_metric

    metric = make_metric(chart, DataSpec(kind="kahler", epsilon=0.05))
    return run(FlowState(0.0, metric), HORIZON,
               FlowControls(derivative_monitors=False, residual_monitors=False))


@pytest.fixture(scope="session")
def acceptance_log(request):
    lines = []
    request.config._acceptance_lines = lines
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
