import numpy as np
import pytest

from hartree_iop import GridSpec, HartreeProblem, Kernel, build_grid, build_potential


def make_problem(n=201, half_width=12.0, mu=0.5, gamma=1.0, preset="harmonic_plus", c=1.0):
    grid = build_grid(GridSpec(1, half_width, n, mu))
    return HartreeProblem(build_potential(grid, preset, c=c), gamma=gamma)


@pytest.fixture(scope="session")
def problem():
    return make_problem(201)


@pytest.fixture(scope="session")
def problem401():
    return make_problem(401)


@pytest.fixture(scope="session")
def small_problem():
    return make_problem(41, half_width=6.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def gaussian(problem, c=0.5, s=1.0, center=None):
    return Kernel.gaussian_product(problem.grid, c, s, center=center)


# one PASS/FAIL line per acceptance criterion, aggregated over its sub-tests
_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance" not in report.nodeid or not name.startswith("test_c"):
        return
    key = int(name[len("test_c"):].split("_", 1)[0])
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA.setdefault(key, []).append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA):
        results = _CRITERIA[key]
        ok = all(outcome == "passed" for _, outcome in results)
        failed = [n for n, outcome in results if outcome != "passed"]
        line = f"criterion {key}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += "  (failing: " + ", ".join(failed) + ")"
        terminalreporter.write_line(line)
