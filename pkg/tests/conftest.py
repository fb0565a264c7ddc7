import numpy as np
import pytest

from stefan_euler.curves import LossCurve
from stefan_euler.laws import GammaLaw, MonomialDeficitLaw, uniform_law


@pytest.fixture(scope="session")
def gamma_law():
    return GammaLaw(shape=1.5, rate=0.5)


@pytest.fixture(scope="session")
def critical_monomial_law():
    return MonomialDeficitLaw(alpha=1.0, a=1.0)


@pytest.fixture(scope="session")
def unit_uniform_law():
    return uniform_law(1.0)


def make_step_curve(dt, values, alpha=1.0):
    return LossCurve(dt=dt, values=np.asarray(values, dtype=float), alpha=alpha)


@pytest.fixture
def step_curve_factory():
    return make_step_curve
