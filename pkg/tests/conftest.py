import numpy as np
import pytest

from logbilinear import ContingencyTable, DesignSpec, build_model_matrices, fit_loglinear

ACCEPTANCE_LINES: list[str] = []


def random_instance(rng, max_levels=4, max_scores=3, mean=40.0):
    """Random design, table and fit with J, K in 1..max_levels."""
    while True:
        J = int(rng.integers(1, max_levels + 1))
        K = int(rng.integers(1, max_levels + 1))
        lx = int(rng.integers(1, min(max_scores, J) + 1))
        ly = int(rng.integers(1, min(max_scores, K) + 1))
        spec = DesignSpec(rng.normal(size=(J, lx)), rng.normal(size=(K, ly)))
        if np.linalg.matrix_rank(spec.xtilde) < lx or np.linalg.matrix_rank(spec.ytilde) < ly:
            continue
        mm = build_model_matrices(spec)
        counts = rng.poisson(mean, size=(J + 1, K + 1)) + 1.0
        table = ContingencyTable(counts)
        return spec, mm, table, fit_loglinear(table, mm)


def random_positive_table(rng, J, K, mean=40.0):
    return rng.gamma(4.0, mean / 4.0, size=(J + 1, K + 1)) + 0.5


@pytest.fixture
def example_2x2():
    spec = DesignSpec.saturated(1, 1)
    mm = build_model_matrices(spec)
    table = ContingencyTable([[10.0, 20.0], [30.0, 40.0]])
    return spec, mm, table


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
