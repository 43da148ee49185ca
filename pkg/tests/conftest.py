"""Shared fixtures: expensive Monte-Carlo runs are computed once per session."""

import numpy as np
import pytest

from sparsefilt import harness, scenario

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log(request):
    """Record one PASS/FAIL line per criterion; printed in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"criterion {number}: [{'PASS' if passed else 'FAIL'}] {title} -- {detail}"
        print(line)
        lines.append(line)

    return record


@pytest.fixture(scope="session")
def paper_result():
    """Full-size paired run (PNLMS, ZA-PNLMS, RZA-PNLMS) on the 512-tap system."""
    cfg = scenario.scenario_to_config(scenario.load_scenario("paper_emse"))
    return harness.run_experiment(cfg)


@pytest.fixture(scope="session")
def smoke_result():
    cfg = scenario.scenario_to_config(scenario.load_scenario("smoke"))
    return harness.run_experiment(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20141)
