"""Shared boundary fixtures.

Reparametrization is the expensive setup step, so the constant-speed
boundaries are built once per session.
"""

import pytest

from billiardflow import (
    make_circle,
    make_ellipse,
    make_limacon,
    reparametrize_constant_speed,
)


@pytest.fixture(scope="session")
def limacon4():
    return make_limacon(4, 0.05)


@pytest.fixture(scope="session")
def limacon4_cs(limacon4):
    return reparametrize_constant_speed(limacon4)


@pytest.fixture(scope="session")
def limacon2_19():
    return make_limacon(2, 0.19)


@pytest.fixture(scope="session")
def limacon2_19_cs(limacon2_19):
    return reparametrize_constant_speed(limacon2_19)


@pytest.fixture(scope="session")
def limacon2_10():
    return make_limacon(2, 0.1)


@pytest.fixture(scope="session")
def limacon2_10_cs(limacon2_10):
    return reparametrize_constant_speed(limacon2_10)


@pytest.fixture(scope="session")
def circle4():
    return make_circle(1.0, 4)


@pytest.fixture(scope="session")
def ellipse21():
    return make_ellipse(2.0, 1.0)


@pytest.fixture(scope="session")
def ellipse21_cs(ellipse21):
    return reparametrize_constant_speed(ellipse21)
