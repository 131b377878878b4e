import numpy as np
import pytest

from meandev import Empirical, Exponential, Pareto, Uniform


@pytest.fixture
def uniform10() -> Uniform:
    return Uniform(0.0, 10.0)


@pytest.fixture
def exp01() -> Exponential:
    return Exponential(0.1)


@pytest.fixture
def pareto3() -> Pareto:
    return Pareto(3.0, 2.0)


@pytest.fixture
def analytic_kinds(uniform10, exp01, pareto3):
    return [uniform10, exp01, pareto3, Uniform(2.0, 7.0)]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0xC0FFEE)


@pytest.fixture
def empirical_fixture(rng) -> Empirical:
    return Empirical(tuple(rng.gamma(2.0, 3.0, size=500)))
