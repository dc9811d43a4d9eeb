import numpy as np
import pytest

from coadapt.envdata import ObservationMap, build_grid, collect_dataset, make_behavior_policy, value_iteration


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_world():
    """Tiny grid, low-dimensional observations and a short dataset."""
    spec = build_grid("grid16-sparse")
    obs = ObservationMap(dim=8, seed=3)
    policy = make_behavior_policy(value_iteration(spec), 0.7)
    data = collect_dataset(spec, obs, policy, 48, seed=5)
    return spec, obs, policy, data


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion and echo it."""

    def _report(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print("\n" + line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
