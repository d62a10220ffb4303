import numpy as np
import pytest

from ppdepth import IntensityModel, TimeDomain

TWO_PI = 2 * np.pi


@pytest.fixture
def unit():
    return TimeDomain(0.0, 1.0)


@pytest.fixture
def ten():
    return TimeDomain(0.0, 10.0)


def one_minus_cos():
    return IntensityModel.from_function(lambda t: 1 - np.cos(t), (0.0, TWO_PI),
                                        cumulative=lambda t: t - np.sin(t))


def one_plus_cos():
    return IntensityModel.from_function(lambda t: 1 + np.cos(t), (0.0, TWO_PI),
                                        cumulative=lambda t: t + np.sin(t))


@pytest.fixture
def ipp_intensity():
    return one_minus_cos()


_RESULTS = []


def record(line):
    _RESULTS.append(line)


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
