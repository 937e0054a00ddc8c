"""Shared fixtures plus a terminal-summary hook for the acceptance run."""

import pytest

import gridlasso as gl

# test_acceptance.py records {criterion number: (passed, detail)} here;
# the hook below prints one line per criterion after the test summary,
# where pytest's per-test capture cannot swallow it.
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[num]
        line = f"CRITERION {num}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f" - {detail}"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def case118():
    return gl.load_bundled_case()


@pytest.fixture(scope="session")
def triangle():
    return gl.load_bundled_case("triangle.json")


@pytest.fixture(scope="session")
def ring5():
    """Five-bus ring plus one chord; small enough to check by hand."""
    buses = tuple(gl.Bus(id=i, injection=v, is_reference=(i == 1))
                  for i, v in zip(range(1, 6), (1.2, -0.4, -0.3, -0.2, -0.3)))
    lines = (gl.Line(1, 1, 2, 0.2), gl.Line(2, 2, 3, 0.25),
             gl.Line(3, 3, 4, 0.2), gl.Line(4, 4, 5, 0.4),
             gl.Line(5, 5, 1, 0.25), gl.Line(6, 2, 4, 0.5))
    return gl.GridCase(buses=buses, lines=lines,
                       internal_buses=frozenset(range(1, 6)), name="ring5")


@pytest.fixture(scope="session")
def run118_seed0(case118):
    """One full noisy pipeline run on the bundled case: the standard
    three-line outage, noise from the 5% rule, seed 0."""
    scenario = gl.OutageScenario.outages(66, 95, 115)
    sigma = gl.noise_sigma(case118, 0.05)
    record = gl.simulate_event(case118, scenario, sigma, seed=0)
    problem = gl.build_problem(case118, gl.internal_angle_change(case118, record))
    path = gl.solve_path(problem, gl.lambda_grid(problem))
    return case118, record, problem, path
