import numpy as np
import pytest

from rexkit.dataset import Dataset, categorical, continuous, load_benchmark


@pytest.fixture(scope="session")
def golf():
    return load_benchmark("golf")


@pytest.fixture(scope="session")
def season():
    return load_benchmark("season")


@pytest.fixture(scope="session")
def iris():
    return load_benchmark("iris")


@pytest.fixture(scope="session")
def breast_cancer():
    return load_benchmark("breast-cancer")


def numeric(X, y, classes=("A", "B"), name="toy"):
    """Small all-continuous dataset."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    schema = tuple(continuous(f"x{i}") for i in range(X.shape[1]))
    return Dataset(schema, tuple(classes), X, y, name=name)


def symbolic(rows, y, classes=("A", "B"), domain=("p", "q", "r")):
    """Small all-categorical dataset; ``rows`` hold domain codes."""
    rows = np.asarray(rows, dtype=float)
    schema = tuple(categorical(f"c{i}", domain) for i in range(rows.shape[1]))
    return Dataset(schema, tuple(classes), rows, y, name="sym")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
