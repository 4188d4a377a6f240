import numpy as np
import pytest

from genrace.bitspace import TrainingSet, build_training_set


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def train8():
    return build_training_set(8, 0.25, seed=7)


@pytest.fixture(scope="session")
def train12():
    return build_training_set(12, 0.01, seed=0, target_min_cost=-6)


@pytest.fixture
def tiny_train():
    # two strings, costs -1 and -3
    return TrainingSet.from_codes([0b0000, 0b1001], n_var=4, epsilon=0.25)


def pytest_configure(config):
    config._criteria = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_criteria", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
