"""
Toy Model Module
J2-type toy system: osculating variation equations as Poisson series,
physical constants and orbital element containers
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import config
from .exceptions import InvalidConfiguration, InvalidElements, SingularEvaluation
from .series_algebra import (COS, SIN, C, CompiledSeries, Coefficient, E, ETA, PoissonSeries, RING,
                             S, to_rational)

OSCULATING = 'osculating'
MEAN = 'mean'
FRAMES = (OSCULATING, MEAN)


@dataclass(frozen=True)
class PhysicalConstants:
    mu: float = config.MU_EARTH
    R_earth: float = config.R_EARTH
    J2: float = config.J2

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidConfiguration(f"mu must be positive, got {self.mu}")
        if not self.R_earth > 0:
            raise InvalidConfiguration(f"R_earth must be positive, got {self.R_earth}")
        if not 0 <= self.J2 < 1:
            raise InvalidConfiguration(f"J2 must lie in [0, 1), got {self.J2}")

    def without_perturbation(self):
        return replace(self, J2=0.0)


@dataclass(frozen=True)
class OrbitalElements:
    """
    Keplerian elements (km, rad) tagged with the frame they live in.

    Guards keep e and sin I away from the singular denominators of the
    theory: e >= E_MIN and |sin I| >= SIN_I_MIN.
    """

    a: float
    e: float
    I: float
    Omega: float
    omega: float
    M: float
    frame: str = OSCULATING

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise InvalidElements(f"unknown element frame {self.frame!r}")
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise InvalidElements(f"non-finite elements {values}")
        if not self.a > 0:
            raise InvalidElements(f"semimajor axis must be positive, got {self.a}")
        if not config.E_MIN <= self.e < 1:
            raise InvalidElements(f"eccentricity {self.e} outside [{config.E_MIN}, 1)")
        if not 0 < self.I < math.pi or abs(math.sin(self.I)) < config.SIN_I_MIN:
            raise InvalidElements(f"inclination {self.I} rad too close to 0 or pi")

    @classmethod
    def from_array(cls, values, frame=OSCULATING):
        a, e, inc, raan, argp, anomaly = (float(v) for v in values)
        return cls(a, e, inc, raan, argp, anomaly, frame)

    @classmethod
    def from_degrees(cls, a, e, i_deg, raan_deg, argp_deg, M_deg, frame=OSCULATING):
        return cls(float(a), float(e), math.radians(i_deg), math.radians(raan_deg),
                   math.radians(argp_deg), math.radians(M_deg), frame)

    @classmethod
    def test_case(cls):
        tc = config.TEST_CASE
        return cls.from_degrees(tc['a_km'], tc['e'], tc['i_deg'], tc['raan_deg'], tc['argp_deg'], tc['M_deg'])

    def as_array(self):
        return np.array([self.a, self.e, self.I, self.Omega, self.omega, self.M], dtype=float)

    def wrapped(self):
        """Copy with Omega, omega and M reduced to [0, 2 pi)"""
        return replace(self, Omega=self.Omega % config.TWO_PI, omega=self.omega % config.TWO_PI,
                       M=self.M % config.TWO_PI)

    def in_frame(self, frame):
        return replace(self, frame=frame)


# ============================================================================
# FLOW FIELD
# ============================================================================

@dataclass(frozen=True)
class FlowField:
    """Taylor coefficients Phi_{j,m,0} of the osculating flow, j = 0..5 for a..M"""

    orders: tuple

    @property
    def max_order(self):
        return len(self.orders) - 1

    def term(self, j, m):
        if m > self.max_order:
            return PoissonSeries.zero()
        return self.orders[m][j]

    def vector(self, m):
        return [self.term(j, m) for j in range(6)]


def _bracket(prefactor, components, e_power=0, eta_power=0, a_power=0):
    """Sum of prefactor * num * trig over components (num, kind, m, w) at order J2"""
    return PoissonSeries.total(
        PoissonSeries.term(Coefficient.build(prefactor * num, e_power, eta_power), kind, m, w,
                           a_power=a_power, n_power=1, roa_power=2)
        for num, kind, m, w in components
    )


def _q(top, bottom=1):
    return RING(to_rational(top) / to_rational(bottom))


def build_toy_flow():
    """
    Osculating variations of (a, e, I, Omega, omega, M) for the J2 toy potential.

    Built term by term from ring elements; the printed-series fixtures are
    transcribed independently so that equals() catches a slip in either.
    """
    s2 = S**2
    keplerian = [PoissonSeries.zero() for _ in range(5)] + [PoissonSeries.term(1, n_power=1)]

    a_rate = _bracket(_q(3, 4), [
        ((6 * s2 - 4) * E, SIN, 1, 0),
        (E * s2, SIN, 1, 2),
        (-4 * s2, SIN, 2, 2),
        (-21 * E * s2, SIN, 3, 2),
    ], a_power=1)

    e_rate = _bracket(_q(3, 8) * ETA, [
        (E * ETA * (6 * s2 - 4), SIN, 1, 0),
        (E * (ETA - 2) * s2, SIN, 1, 2),
        (-4 * (ETA - 1) * s2, SIN, 2, 2),
        (-7 * E * (3 * ETA - 2) * s2, SIN, 3, 2),
    ], e_power=1)

    i_rate = _bracket(_q(3, 4) * C * S, [
        (E, SIN, 1, 2),
        (RING(-2), SIN, 2, 2),
        (-7 * E, SIN, 3, 2),
    ], eta_power=1)

    node_rate = _bracket(_q(-3, 4) * C, [
        (RING(2), COS, 0, 0),
        (6 * E, COS, 1, 0),
        (E, COS, 1, 2),
        (RING(-2), COS, 2, 2),
        (-7 * E, COS, 3, 2),
    ], eta_power=1)

    long_bracket = E**2 * (s2 - 2) + s2
    argp_rate = _bracket(_q(-3, 8), [
        (4 * E * (s2 - 1), COS, 0, 0),
        (-4 * E * (s2 - 1), COS, 2, 2),
        (E**2 * (6 * s2 - 8) + 6 * s2 - 4, COS, 1, 0),
        (long_bracket, COS, 1, 2),
        (-7 * long_bracket, COS, 3, 2),
    ], e_power=1, eta_power=1)

    anomaly_rate = _bracket(_q(-3, 8), [
        (4 * E * (3 * s2 - 2), COS, 0, 0),
        (-12 * E * s2, COS, 2, 2),
        ((7 * E**2 - 1) * (6 * s2 - 4), COS, 1, 0),
        ((7 * E**2 - 1) * s2, COS, 1, 2),
        (-7 * (7 * E**2 - 1) * s2, COS, 3, 2),
    ], e_power=1)

    first = [a_rate, e_rate, i_rate, node_rate, argp_rate, anomaly_rate]
    return FlowField(orders=(tuple(keplerian), tuple(first)))


def osculating_rhs(elems, consts):
    """Element rates d x_j / dt = Phi_{j,0,0} + J2 Phi_{j,1,0} (km/s and rad/s)"""
    flow = _default_flow()
    return np.array([
        flow.term(j, 0).evaluate(elems, consts) + consts.J2 * flow.term(j, 1).evaluate(elems, consts)
        for j in range(6)
    ])


_FLOW_CACHE = {}


def _default_flow():
    if 'flow' not in _FLOW_CACHE:
        _FLOW_CACHE['flow'] = build_toy_flow()
    return _FLOW_CACHE['flow']


class ToyModel:
    """Compiled osculating right-hand side used inside the integrator"""

    def __init__(self, consts, flow=None):
        self.consts = consts
        self.flow = flow or _default_flow()
        self._first_order = CompiledSeries(self.flow.vector(1))

    def rates(self, t, y):
        """Rates for a raw state (a, e, I, Omega, omega, M) with M unwrapped"""
        a, e, inc, _, argp, anomaly = y
        if not (a > 0 and 0 <= e < 1):
            raise SingularEvaluation(f"state left the elliptic domain: a={a}, e={e}")
        n = math.sqrt(self.consts.mu / a**3)
        perturbation = self._first_order.at(a, e, inc, argp, anomaly, self.consts.mu,
                                            self.consts.R_earth, 1.0)
        out = np.array(perturbation, dtype=float) * self.consts.J2
        out[5] += n
        return out
