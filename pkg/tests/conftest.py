"""Shared fixtures and the acceptance summary hook.

Tests marked ``@pytest.mark.acceptance("<label>")`` are top-level
acceptance criteria; a summary section prints one PASS/FAIL line per
criterion after the run.
"""

from __future__ import annotations

import numpy as np
import pytest

from covergraph.model import DistanceMatrix


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(label): top-level acceptance criterion"
    )
    config._acceptance_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    results = item.config._acceptance_results
    if report.when == "call":
        results[label] = report.outcome
    elif report.outcome != "passed":  # setup error or teardown crash
        results[label] = "failed"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in results.items():
        word = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {word}: {label}")


@pytest.fixture
def five_node_fixture() -> DistanceMatrix:
    """Reference and target joined by two parallel intermediates.

    r-a and r-b are near matches, a-t and b-t are close, r-t starts far;
    one extra node e is far from everything.
    """
    ids = ("r", "a", "b", "t", "e")
    d = np.full((5, 5), 0.99)
    np.fill_diagonal(d, 0.0)
    for i, j, v in ((0, 1, 0.01), (0, 2, 0.01), (1, 3, 0.05), (2, 3, 0.06)):
        d[i, j] = d[j, i] = v
    return DistanceMatrix(track_ids=ids, values=d)


def random_distance_matrix(rng: np.random.Generator, n: int) -> DistanceMatrix:
    """Symmetric matrix with entries in (0, 1) and zero diagonal."""
    values = rng.uniform(0.01, 0.99, size=(n, n))
    values = (values + values.T) / 2.0
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(
        track_ids=tuple(f"n{i}" for i in range(n)), values=values
    )
