import numpy as np
import pytest

from phtess.model import IsotropicDistribution, ProcessIntensity
from phtess.sampler import sample_process

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def iso2():
    return IsotropicDistribution(2)


@pytest.fixture
def iso3():
    return IsotropicDistribution(3)


@pytest.fixture
def unit_rate():
    return ProcessIntensity(1.0)


def isotropic_sample(d, radius, seed, gamma=1.0):
    return sample_process(IsotropicDistribution(d), ProcessIntensity(gamma), radius, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)
