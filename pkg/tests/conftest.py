import numpy as np
import pytest

from cogamc import default_table, reference_model
from cogamc.cli import ExperimentConfig, design_grid
from cogamc.regions import build_grid, product_boundaries


def reference_grid(model, table, radial=10, bands=30, margin=2.0):
    """Grid with ``radial * bands`` regions for the reference scenario."""
    g = table.thresholds(1e-5 / margin)
    product_bands = product_boundaries(g, g).size - 1
    return build_grid(table, 1e-5, 1e-5, model, radial, bands - product_bands, margin=margin)


@pytest.fixture(scope="session")
def table():
    return default_table()


@pytest.fixture(scope="session")
def model():
    return reference_model()


@pytest.fixture(scope="session")
def grid300(model, table):
    return reference_grid(model, table)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
