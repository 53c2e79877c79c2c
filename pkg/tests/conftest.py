import numpy as np
import pytest

from exalt import dataset


@pytest.fixture(scope="session")
def blobs3():
    return dataset.gen_blobs(3, 50, 2, 10.0, seed=7)


@pytest.fixture
def line4():
    # 1-D points {0, 1, 10, 11} with the natural two-cluster labeling
    return dataset.Dataset(np.array([[0.0], [1.0], [10.0], [11.0]])), np.array([0, 0, 1, 1])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
