import numpy as np
import pytest

from critmult import conealg
from critmult.stationarity import CompositeProblem

conealg.set_exact_default(True)


@pytest.fixture(scope="session")
def ex54():
    return CompositeProblem.from_strings(2, "0.5*x1^2 + 0.5*(x2+1)^2", ["x1^3 - x2", "-x2"],
                                         [{"kind": "nonpos"}, {"kind": "nonpos"}])


@pytest.fixture(scope="session")
def crit():
    return CompositeProblem.from_strings(1, "x1^2", ["x1^2"], [{"kind": "zero"}])


@pytest.fixture(scope="session")
def ineq():
    return CompositeProblem.from_strings(1, "0.5*(x1-1)^2", ["x1"], [{"kind": "nonpos"}])


@pytest.fixture(scope="session")
def eqn():
    return CompositeProblem.from_strings(2, "0.5*x1^2 + 0.5*x2^2", ["x1 + x1^2 + x2^2"], [{"kind": "zero"}])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
