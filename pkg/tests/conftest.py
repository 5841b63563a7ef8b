"""Shared fixtures: each theory is derived once per test session"""

import pytest

from logic.data_loader import FixtureLoader
from logic.lie_engine import SEMIMAJOR, Theory, derive_theory
from logic.toy_model import OrbitalElements, PhysicalConstants, build_toy_flow


@pytest.fixture(scope='session')
def consts():
    return PhysicalConstants()


@pytest.fixture(scope='session')
def test_elements():
    return OrbitalElements.test_case()


@pytest.fixture(scope='session')
def flow():
    return build_toy_flow()


@pytest.fixture(scope='session')
def printed():
    loader = FixtureLoader()
    loader.load()
    return loader


@pytest.fixture(scope='session')
def theory1():
    return derive_theory(Theory.PURE_PERIODIC_TRANSFORMATION, 2, verbose=False)


@pytest.fixture(scope='session')
def theory2():
    return derive_theory(Theory.PURE_PERIODIC_GENERATOR, 2, verbose=False)


@pytest.fixture(scope='session')
def theory1_third():
    """Third order plus the fourth-order mean semimajor axis rate used by the patch"""
    return derive_theory(Theory.PURE_PERIODIC_TRANSFORMATION, 3, ((SEMIMAJOR, 4),), verbose=False)


@pytest.fixture(scope='session')
def theory2_third():
    return derive_theory(Theory.PURE_PERIODIC_GENERATOR, 3, ((SEMIMAJOR, 4),), verbose=False)
