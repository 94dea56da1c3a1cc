"""Shared fixtures for the markov-bounds tests."""

import math

import pytest

from src.models import CostSpec, DiffusionModel, DiscountedHorizon, FiniteHorizon, InitialCondition
from src.models import biocircuit, lotka_volterra
from src.polynomials import Polynomial, Variable
from src.regions import IntervalBox


@pytest.fixture
def xy():
    """Two state variables x and y."""
    return Variable("x"), Variable("y")


def scalar_decay(rho: float = 1.0, x0: float = 1.0, sigma: float = 0.0):
    """dx = -x dt + sigma dW with running cost x^2 on the whole line."""
    t, x = Variable("t", "time"), Variable("x")
    X = Polynomial.variable(x)
    model = DiffusionModel(
        time=t,
        states=(x,),
        controls=(),
        drift=(-X,),
        diffusion_matrix=((Polynomial.constant(sigma * sigma),),),
        state_set=IntervalBox((x,), (-math.inf,), (math.inf,)),
        control_set=IntervalBox((), (), ()),
        name="scalar_decay",
    )
    cost = CostSpec(X * X, Polynomial.zero(), DiscountedHorizon(rho, ((0.0,),)))
    return model, cost, InitialCondition.dirac((x0,))


def controlled_integrator(horizon: float = 1.0, x0: float = 0.5):
    """dx = u dt with u in [-1, 1] and cost x^2 + u^2 over [0, T]."""
    t, x, u = Variable("t", "time"), Variable("x"), Variable("u", "control")
    X, U = Polynomial.variable(x), Polynomial.variable(u)
    model = DiffusionModel(
        time=t,
        states=(x,),
        controls=(u,),
        drift=(U,),
        diffusion_matrix=((Polynomial.zero(),),),
        state_set=IntervalBox((x,), (-math.inf,), (math.inf,)),
        control_set=IntervalBox((u,), (-1.0,), (1.0,)),
        name="integrator",
    )
    cost = CostSpec(X * X + U * U, Polynomial.zero(), FiniteHorizon(horizon))
    return model, cost, InitialCondition.dirac((x0,))


@pytest.fixture
def scalar_problem():
    return scalar_decay()


@pytest.fixture
def integrator_problem():
    return controlled_integrator()


@pytest.fixture(scope="session")
def lv_problem():
    """Lotka-Volterra model, cost and initial condition."""
    return lotka_volterra()


@pytest.fixture(scope="session")
def bio_problem():
    """Biocircuit model with the horizon shortened to 2."""
    return biocircuit(horizon=2.0)


@pytest.fixture
def scalar_factory():
    """Builder for the scalar decay problem at a chosen discount rate."""
    return scalar_decay


@pytest.fixture
def integrator_factory():
    return controlled_integrator
