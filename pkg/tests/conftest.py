from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from shapescale.complexity import pair_table
from shapescale.ingest import column_sigmas, deduplicate, load_csv

DATA = Path(__file__).parent / "data"

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def iris_path():
    return DATA / "iris.csv"


@pytest.fixture(scope="session")
def iris(iris_path):
    return load_csv(iris_path, label_column="species")


@pytest.fixture(scope="session")
def iris_table(iris):
    return pair_table(deduplicate(iris), iris, column_sigmas(iris))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one verdict per acceptance criterion; printed at the end of the run."""

    def record(number, passed, detail):
        ACCEPTANCE[number] = (passed, detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
