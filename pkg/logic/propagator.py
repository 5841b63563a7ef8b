"""
Propagator Module
Reference integration of the osculating flow, long-step integration of the
mean variations and the semi-analytic pipeline built on them
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from . import config
from .error_analysis import ErrorAnalyzer, intrinsic_errors
from .exceptions import (CacheError, FrameMismatch, InvalidConfiguration, InvalidElements,
                         NoConvergence, StepFailure)
from .lie_engine import ELEMENTS, SEMIMAJOR, Theory
from .series_algebra import CompiledSeries
from .toy_model import MEAN, OSCULATING, OrbitalElements, ToyModel


# ============================================================================
# CONFIGURATION TYPES
# ============================================================================

@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = config.REFERENCE_REL_TOL
    abs_tol: float = config.REFERENCE_ABS_TOL
    max_step: float = config.REFERENCE_MAX_STEP
    method: str = config.INTEGRATOR_METHOD

    def __post_init__(self):
        for name in ('rel_tol', 'abs_tol'):
            value = getattr(self, name)
            if not 0 < value < 1e-3:
                raise InvalidConfiguration(f"{name} must lie in (0, 1e-3), got {value}")
        if not self.max_step > 0:
            raise InvalidConfiguration(f"max_step must be positive, got {self.max_step}")
        if self.method not in config.SUPPORTED_METHODS:
            raise InvalidConfiguration(f"unsupported integrator {self.method}")

    @classmethod
    def reference(cls):
        return cls()

    @classmethod
    def mean(cls):
        return cls(config.MEAN_REL_TOL, config.MEAN_ABS_TOL, config.MEAN_MAX_STEP)


@dataclass(frozen=True)
class TheoryConfig:
    """
    An m-th order theory: mean variations through order m + 1, corrections
    through order m, the inverse semimajor axis correction through m + 1.
    Patching adds the order m + 2 semimajor axis rate (Theory 1 only).
    """

    theory: Theory
    order: int
    patched: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'theory', Theory(self.theory))
        if not 1 <= self.order <= 2:
            raise InvalidConfiguration(f"theory order must be 1 or 2, got {self.order}")

    @property
    def is_patched(self):
        return self.patched and self.theory is Theory.PURE_PERIODIC_TRANSFORMATION

    @property
    def derivation_order(self):
        return self.order + 1

    @property
    def extra_rates(self):
        return ((SEMIMAJOR, self.order + 2),) if self.is_patched else ()

    @property
    def rate_orders(self):
        orders = [self.order + 1] * 6
        if self.is_patched:
            orders[SEMIMAJOR] = self.order + 2
        return orders

    @property
    def inverse_orders(self):
        orders = [self.order] * 6
        orders[SEMIMAJOR] = self.order + 1
        return orders

    def direct_orders(self, correction_order=None):
        return [self.order if correction_order is None else correction_order] * 6


@dataclass(frozen=True)
class StateSample:
    t: float
    osculating: OrbitalElements
    position: np.ndarray = field(compare=False)
    velocity: np.ndarray = field(compare=False)


class Trajectory(list):
    """List of samples carrying the right-hand-side evaluation count"""

    def __init__(self, items=(), nfev=0):
        super().__init__(items)
        self.nfev = nfev


# ============================================================================
# TWO-BODY GEOMETRY
# ============================================================================

def kepler_solve(M, e):
    """Eccentric anomaly from E - e sin E = M by Newton iteration started at E = M"""
    if not 0 <= e < 1:
        raise InvalidElements(f"eccentricity {e} outside [0, 1)")
    turns = math.floor((M + math.pi) / config.TWO_PI)
    reduced = M - turns * config.TWO_PI
    E = reduced
    for _ in range(config.KEPLER_MAX_ITER):
        delta = (E - e * math.sin(E) - reduced) / (1.0 - e * math.cos(E))
        E -= delta
        if abs(delta) < config.KEPLER_STEP_TOL:
            break
    else:
        raise NoConvergence(f"Kepler equation unsolved for M={M}, e={e}")
    if abs(E - e * math.sin(E) - reduced) > config.KEPLER_TOL:
        raise NoConvergence(f"Kepler residual above tolerance for M={M}, e={e}")
    return E + turns * config.TWO_PI


def perifocal_rotation(inc, raan, argp):
    """R3(Omega) R1(I) R3(omega)"""
    cO, sO = math.cos(raan), math.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    cw, sw = math.cos(argp), math.sin(argp)
    return np.array([
        [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
        [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
        [sw * si, cw * si, ci]
    ])


def elements_to_cartesian(elems, mu):
    """Inertial position (km) and velocity (km/s)"""
    a, e = elems.a, elems.e
    E = kepler_solve(elems.M, e)
    cosE, sinE = math.cos(E), math.sin(E)
    eta = math.sqrt(1.0 - e * e)
    speed = math.sqrt(mu / a**3) * a / (1.0 - e * cosE)
    r_pf = np.array([a * (cosE - e), a * eta * sinE, 0.0])
    v_pf = np.array([-speed * sinE, speed * eta * cosE, 0.0])
    rotation = perifocal_rotation(elems.I, elems.Omega, elems.omega)
    return rotation @ r_pf, rotation @ v_pf


def make_sample(t, elems, mu):
    position, velocity = elements_to_cartesian(elems, mu)
    return StateSample(float(t), elems, position, velocity)


def time_grid(duration, sample_dt):
    if not duration > 0 or not sample_dt > 0:
        raise InvalidConfiguration("duration and sample_dt must be positive")
    count = int(math.floor(duration / sample_dt + 1e-9))
    return sample_dt * np.arange(count + 1, dtype=float)


# ============================================================================
# INTEGRATION
# ============================================================================

def _integrate(rhs, y0, t_grid, cfg):
    """States of shape (6, len(t_grid)) and the evaluation count"""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise InvalidConfiguration("time grid must start at 0 and increase strictly")
    if t_grid.size == 1:
        return np.asarray(y0, dtype=float).reshape(6, 1), 0
    solution = solve_ivp(rhs, (0.0, float(t_grid[-1])), np.asarray(y0, dtype=float),
                         method=cfg.method, t_eval=t_grid, rtol=cfg.rel_tol, atol=cfg.abs_tol,
                         max_step=cfg.max_step)
    if not solution.success:
        raise StepFailure(f"{cfg.method} failed: {solution.message}")
    return solution.y, solution.nfev


def _elements_on_grid(states, frame):
    return [OrbitalElements.from_array(states[:, i], frame).wrapped() for i in range(states.shape[1])]


def propagate_osculating(init, consts, t_grid, cfg=None):
    """Reference run: the osculating flow integrated with tight error control"""
    cfg = cfg or IntegratorConfig.reference()
    model = ToyModel(consts)
    states, nfev = _integrate(model.rates, init.as_array(), t_grid, cfg)
    samples = [make_sample(t, elems, consts.mu)
               for t, elems in zip(t_grid, _elements_on_grid(states, OSCULATING))]
    return Trajectory(samples, nfev)


class SemiAnalyticModel:
    """
    Compiled mean rates and corrections of one theory configuration.

    correction_order overrides the order of the mean-to-osculating
    corrections; 0 leaves the mean elements uncorrected.
    """

    def __init__(self, artifacts, tc, consts, correction_order=None):
        if artifacts.order < tc.derivation_order:
            raise CacheError(f"theory {int(tc.theory)} of order {tc.order} needs a derivation "
                             f"to order {tc.derivation_order}, got {artifacts.order}")
        for j, m in tc.extra_rates:
            if not artifacts.has('phi', j, m):
                raise CacheError(f"patched theory needs the order {m} {config.ELEMENT_NAMES[j]} rate")
        self.tc = tc
        self.consts = consts
        self._rates = CompiledSeries([artifacts.eps_series('phi', j, tc.rate_orders[j]) for j in ELEMENTS])
        self._inverse = CompiledSeries([artifacts.eps_series('inverse', j, tc.inverse_orders[j])
                                        for j in ELEMENTS])
        self._direct = CompiledSeries([artifacts.eps_series('direct', j, order)
                                       for j, order in zip(ELEMENTS, tc.direct_orders(correction_order))])

    def _at(self, compiled, y):
        a, e, inc, _, argp, anomaly = y
        return np.array(compiled.at(a, e, inc, argp, anomaly, self.consts.mu, self.consts.R_earth,
                                    self.consts.J2), dtype=float)

    def rates(self, t, y):
        out = self._at(self._rates, y)
        out[5] += math.sqrt(self.consts.mu / y[0]**3)
        return out

    def to_mean(self, elems):
        if elems.frame != OSCULATING:
            raise FrameMismatch("inverse corrections take osculating elements")
        values = elems.as_array()
        return OrbitalElements.from_array(values + self._at(self._inverse, values), MEAN)

    def to_osculating(self, elems):
        if elems.frame != MEAN:
            raise FrameMismatch("direct corrections take mean elements")
        values = elems.as_array()
        return OrbitalElements.from_array(values + self._at(self._direct, values), OSCULATING)

    def osculating_grid(self, states):
        """Direct corrections applied column-wise to mean states of shape (6, N)"""
        a, e, inc, _, argp, anomaly = states
        corrections = self._direct.on_grid(a, e, inc, argp, anomaly, self.consts.mu,
                                           self.consts.R_earth, self.consts.J2)
        return states + corrections


def osc_to_mean(init, theory, tc, consts):
    return SemiAnalyticModel(theory, tc, consts).to_mean(init)


def mean_to_osc(mean, theory, tc, consts):
    return SemiAnalyticModel(theory, tc, consts).to_osculating(mean)


def propagate_mean(init_mean, theory, tc, consts, t_grid, cfg=None):
    """Mean elements integrated with long steps"""
    if init_mean.frame != MEAN:
        raise FrameMismatch("mean propagation starts from mean elements")
    cfg = cfg or IntegratorConfig.mean()
    model = theory if isinstance(theory, SemiAnalyticModel) else SemiAnalyticModel(theory, tc, consts)
    states, nfev = _integrate(model.rates, init_mean.as_array(), t_grid, cfg)
    return Trajectory(_elements_on_grid(states, MEAN), nfev)


def semianalytic_pipeline(init_osc, theory, tc, consts, t_grid, cfg=None, correction_order=None):
    """osc_to_mean, then propagate_mean, then per-sample direct corrections"""
    cfg = cfg or IntegratorConfig.mean()
    model = SemiAnalyticModel(theory, tc, consts, correction_order)
    mean0 = model.to_mean(init_osc)
    states, nfev = _integrate(model.rates, mean0.as_array(), t_grid, cfg)
    osculating = model.osculating_grid(states)
    samples = [make_sample(t, elems, consts.mu)
               for t, elems in zip(t_grid, _elements_on_grid(osculating, OSCULATING))]
    return Trajectory(samples, nfev)


# ============================================================================
# EXPORT
# ============================================================================

def samples_to_dataframe(samples):
    rows = []
    for sample in samples:
        el = sample.osculating
        rows.append([sample.t, el.a, el.e, el.I, el.Omega, el.omega, el.M,
                     *sample.position, *sample.velocity])
    return pd.DataFrame(rows, columns=config.TRAJECTORY_COLUMNS)


def export_trajectory(samples, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    samples_to_dataframe(samples).to_csv(path, index=False, float_format=config.CSV_FLOAT_FORMAT)
    return path


# ============================================================================
# CAMPAIGN
# ============================================================================

class PropagationCampaign:
    """Runs one scenario: reference, semi-analytic solution, errors and CSV export"""

    def __init__(self, scenario, artifacts, out_dir=None):
        self.scenario = scenario
        self.artifacts = artifacts
        self.out_dir = out_dir or config.RESULTS_DIR
        self.reference = None
        self.semianalytic = None
        self.analyzer = None
        self.files = {}

    def run(self):
        sc = self.scenario
        print("\n" + "=" * 70)
        print(f"PROPAGATION RUN: {sc.name}")
        print("=" * 70)
        print(f"Theory {int(sc.theory_config.theory)}, order {sc.theory_config.order}"
              f"{' (patched)' if sc.theory_config.is_patched else ''}; "
              f"{sc.duration / 86400.0:g} days every {sc.sample_dt:g} s")

        t_grid = time_grid(sc.duration, sc.sample_dt)

        print("\nIntegrating reference orbit...")
        self.reference = propagate_osculating(sc.init_elements, sc.constants, t_grid, sc.integrator)
        print(f"✓ {len(self.reference)} samples, {self.reference.nfev} right-hand-side evaluations")

        print("\nRunning semi-analytic propagation...")
        self.semianalytic = semianalytic_pipeline(sc.init_elements, self.artifacts, sc.theory_config,
                                                  sc.constants, t_grid)
        print(f"✓ {len(self.semianalytic)} samples, {self.semianalytic.nfev} right-hand-side evaluations")

        print("\nComputing errors...")
        records = [intrinsic_errors(ref, test) for ref, test in zip(self.reference, self.semianalytic)]
        self.analyzer = ErrorAnalyzer(records)
        self.analyzer.print_summary_statistics()

        self.export()
        return self.analyzer

    def export(self):
        name = self.scenario.name
        paths = {kind: os.path.join(self.out_dir, config.OUTPUT_FILES[kind].format(run=name))
                 for kind in ('reference', 'semianalytic', 'errors')}
        export_trajectory(self.reference, paths['reference'])
        export_trajectory(self.semianalytic, paths['semianalytic'])
        self.analyzer.export_csv(paths['errors'])
        self.files = paths
        print("\n✓ Files written:")
        for path in paths.values():
            print(f"  - {path}")
        return paths
