import numpy as np
import pytest

from aeimpute import (
    NetworkConfig, NormalizationParams, SynthConfig, generate, init_model, normalize,
    split_dataset, train,
)


@pytest.fixture(scope="session")
def small_data():
    return generate(SynthConfig(n_records=1500, seed=5))


@pytest.fixture(scope="session")
def small_splits(small_data):
    return split_dataset(normalize(small_data), seed=5)


@pytest.fixture(scope="session")
def trained_model(small_data, small_splits):
    tr, va, _ = small_splits
    m0 = init_model(NetworkConfig(seed=5), NormalizationParams.from_schema(small_data.schema))
    model, _ = train(m0, tr, va, max_cycles=300)
    return model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def identity(X):
    return np.array(X, dtype=float, copy=True)


VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def check(label, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        request.config.stash[VERDICTS].append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
