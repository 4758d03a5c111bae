import numpy as np
import pytest

from dtmm.coeffs import Problem, parse_problem


def smooth_coeff(rng, positive=False):
    """Random analytic coefficient string c0 + c1 sin(w x + phi) + c2 x."""
    c1 = rng.uniform(-0.5, 0.5)
    c2 = rng.uniform(-0.2, 0.2)
    w = rng.uniform(0.5, 2.0)
    phi = rng.uniform(0, np.pi)
    c0 = rng.uniform(1.5, 3.0) if positive else rng.uniform(-1.0, 1.0)
    return f"{c0!r} + {c1!r}*sin({w!r}*x + {phi!r}) + {c2!r}*x"


def random_problem(rng, n, domain=(0.0, 1.0), **opts):
    coeffs = [smooth_coeff(rng, positive=(m == 0)) for m in range(n)]
    return Problem.from_strings(coeffs, domain, **opts)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def harmonic():
    return parse_problem("order=2; a0=1; domain=[0,6.283185307179586]")


@pytest.fixture
def airy():
    return parse_problem("order=2; a0=x; domain=[-2,2]")


@pytest.fixture
def euler_cauchy():
    return parse_problem("order=4; a0=-1/x^4; domain=[1,2]")
