import numpy as np
import pytest

from vibnovelty.signal_lab import default_specs, generate_dataset


@pytest.fixture(scope="session")
def study_dataset():
    """Default 8-set dataset with the study noise level."""
    return generate_dataset(default_specs(), seed=0)


@pytest.fixture(scope="session")
def clean_dataset():
    return generate_dataset(default_specs(noise_sigma=0.0), seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
