import math
import os

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logic import config
from logic.data_loader import ScenarioLoader
from logic.error_analysis import wrap_angle
from logic.exceptions import CacheError, FrameMismatch, InvalidConfiguration, InvalidElements
from logic.lie_engine import NODE, SEMIMAJOR, Theory
from logic.propagator import (IntegratorConfig, PropagationCampaign, SemiAnalyticModel, TheoryConfig,
                              elements_to_cartesian, export_trajectory, kepler_solve, mean_to_osc,
                              osc_to_mean, propagate_mean, propagate_osculating,
                              semianalytic_pipeline, time_grid)
from logic.toy_model import MEAN, OrbitalElements

DAY = 86400.0
SCENARIO_DIR = os.path.join(config.BASE_DIR, 'data', 'scenarios')


def bisection(M, e):
    low, high = M - 1.0, M + 1.0
    for _ in range(200):
        mid = 0.5 * (low + high)
        if mid - e * math.sin(mid) - M > 0:
            high = mid
        else:
            low = mid
    return 0.5 * (low + high)


class TestKepler:

    def test_grid_against_bisection(self):
        rng = np.random.default_rng(7)
        for M, e in zip(rng.uniform(-math.pi, math.pi, 1000), rng.uniform(0.0, 0.9, 1000)):
            assert kepler_solve(M, e) == pytest.approx(bisection(M, e), abs=1e-12)

    def test_symmetric_points(self):
        assert kepler_solve(0.0, 0.6) == 0.0
        assert kepler_solve(1.3, 0.0) == pytest.approx(1.3, abs=1e-15)

    def test_unwrapped_anomaly_keeps_turns(self):
        assert kepler_solve(1.0 + 4 * math.pi, 0.2) == pytest.approx(kepler_solve(1.0, 0.2) + 4 * math.pi)

    def test_hyperbolic_eccentricity_rejected(self):
        with pytest.raises(InvalidElements):
            kepler_solve(1.0, 1.0)


class TestGeometry:

    def test_periapsis_on_x_axis(self, consts):
        elems = OrbitalElements(9500.0, 0.2, 0.3, 0.0, 0.0, 0.0)
        position, velocity = elements_to_cartesian(elems, consts.mu)
        assert position[0] == pytest.approx(9500.0 * 0.8)
        assert list(position[1:]) == pytest.approx([0.0, 0.0], abs=1e-9)
        assert float(position @ velocity) == pytest.approx(0.0, abs=1e-9)

    @given(st.floats(7000.0, 40000.0), st.floats(0.05, 0.9), st.floats(0.1, 3.0),
           st.floats(0.0, 6.28), st.floats(0.0, 6.28), st.floats(-10.0, 10.0))
    @settings(max_examples=60, deadline=None)
    def test_vis_viva(self, a, e, inc, raan, argp, anomaly):
        mu = config.MU_EARTH
        position, velocity = elements_to_cartesian(OrbitalElements(a, e, inc, raan, argp, anomaly), mu)
        energy = float(velocity @ velocity) / 2 - mu / float(np.linalg.norm(position))
        assert energy == pytest.approx(-mu / (2 * a), rel=1e-11)


class TestConfigs:

    def test_time_grid(self):
        grid = time_grid(3 * DAY, 300.0)
        assert len(grid) == 865
        assert grid[-1] == 3 * DAY
        assert list(time_grid(100.0, 300.0)) == [0.0]

    def test_time_grid_rejects_nonpositive(self):
        with pytest.raises(InvalidConfiguration):
            time_grid(0.0, 300.0)

    def test_patched_theory1(self):
        tc = TheoryConfig(Theory.PURE_PERIODIC_TRANSFORMATION, 2, patched=True)
        assert tc.is_patched
        assert tc.derivation_order == 3
        assert tc.extra_rates == ((SEMIMAJOR, 4),)
        assert tc.rate_orders == [4, 3, 3, 3, 3, 3]
        assert tc.inverse_orders == [3, 2, 2, 2, 2, 2]
        assert tc.direct_orders() == [2] * 6
        assert tc.direct_orders(0) == [0] * 6

    def test_patch_ignored_for_theory2(self):
        tc = TheoryConfig(2, 2, patched=True)
        assert tc.theory is Theory.PURE_PERIODIC_GENERATOR
        assert not tc.is_patched
        assert tc.extra_rates == ()

    def test_theory_order_range(self):
        with pytest.raises(InvalidConfiguration):
            TheoryConfig(1, 3)

    @pytest.mark.parametrize('kwargs', [dict(rel_tol=0.0), dict(abs_tol=0.1), dict(max_step=-1.0),
                                        dict(method='Euler')])
    def test_integrator_guards(self, kwargs):
        with pytest.raises(InvalidConfiguration):
            IntegratorConfig(**kwargs)


class TestReference:

    def test_keplerian_limit(self, test_elements, consts):
        grid = time_grid(DAY, 3600.0)
        samples = propagate_osculating(test_elements, consts.without_perturbation(), grid)
        n = math.sqrt(consts.mu / test_elements.a**3)
        for sample in samples:
            el = sample.osculating
            assert (el.a, el.e, el.I) == (test_elements.a, test_elements.e, test_elements.I)
            assert wrap_angle(el.M - test_elements.M - n * sample.t) == pytest.approx(0.0, abs=1e-8)

    def test_tolerance_consistency(self, test_elements, consts):
        grid = time_grid(DAY, 3600.0)
        tight = propagate_osculating(test_elements, consts, grid)
        loose = propagate_osculating(test_elements, consts, grid, IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10))
        for a, b in zip(tight, loose):
            assert np.linalg.norm(a.position - b.position) < 1e-8 * np.linalg.norm(a.position)

    def test_evaluation_count_is_reported(self, test_elements, consts):
        samples = propagate_osculating(test_elements, consts, time_grid(DAY, 300.0))
        assert 0 < samples.nfev < 10**6
        assert len(samples) == 289

    def test_grid_must_start_at_zero(self, test_elements, consts):
        with pytest.raises(InvalidConfiguration):
            propagate_osculating(test_elements, consts, [10.0, 20.0])


class TestSemiAnalyticModel:

    def test_needs_next_order(self, theory1, consts):
        with pytest.raises(CacheError):
            SemiAnalyticModel(theory1, TheoryConfig(1, 2), consts)

    def test_patch_needs_isolated_rate(self, theory1, consts):
        with pytest.raises(CacheError):
            SemiAnalyticModel(theory1, TheoryConfig(1, 1, patched=True), consts)

    def test_frames(self, theory1, test_elements, consts):
        model = SemiAnalyticModel(theory1, TheoryConfig(1, 1), consts)
        with pytest.raises(FrameMismatch):
            model.to_osculating(test_elements)
        with pytest.raises(FrameMismatch):
            model.to_mean(test_elements.in_frame(MEAN))

    def test_identity_without_perturbation(self, theory2, test_elements, consts):
        tc = TheoryConfig(2, 1)
        mean = osc_to_mean(test_elements, theory2, tc, consts.without_perturbation())
        assert mean.frame == MEAN
        assert np.array_equal(mean.as_array(), test_elements.as_array())

    @pytest.mark.parametrize('theory', ['theory1', 'theory2'])
    def test_round_trip(self, theory, test_elements, consts, request):
        artifacts = request.getfixturevalue(theory)
        tc = TheoryConfig(artifacts.theory, 1)
        mean = osc_to_mean(test_elements, artifacts, tc, consts)
        back = mean_to_osc(mean, artifacts, tc, consts)
        correction = abs(mean.a - test_elements.a)
        assert correction > 0.1
        # the residual is second order in J2, the correction first order
        assert abs(back.a - test_elements.a) < 5e-2 * correction
        assert abs(back.a - test_elements.a) < 1e-2

    def test_first_order_inverse_is_opposite(self, theory1, test_elements, consts):
        model = SemiAnalyticModel(theory1, TheoryConfig(1, 1), consts)
        shift = model.to_mean(test_elements).e - test_elements.e
        direct = theory1.direct[1][1].evaluate(test_elements, consts) * consts.J2
        assert shift == pytest.approx(-direct, rel=1e-12)

    def test_mean_node_rate(self, theory1, test_elements, consts):
        model = SemiAnalyticModel(theory1, TheoryConfig(1, 1), consts)
        rate = model.rates(0.0, test_elements.as_array())[NODE]
        expected = (consts.J2 * theory1.phi[1][NODE].evaluate(test_elements, consts)
                    + consts.J2**2 / 2 * theory1.phi[2][NODE].evaluate(test_elements, consts))
        assert rate == pytest.approx(expected, rel=1e-12)

    def test_keplerian_mean_flow(self, theory2, test_elements, consts):
        kepler = consts.without_perturbation()
        grid = time_grid(DAY, 3600.0)
        states = propagate_mean(test_elements.in_frame(MEAN), theory2, TheoryConfig(2, 1), kepler, grid)
        assert all(s.a == test_elements.a and s.e == test_elements.e for s in states)


class TestPipeline:

    def test_zero_length_grid(self, theory1, test_elements, consts):
        samples = semianalytic_pipeline(test_elements, theory1, TheoryConfig(1, 1), consts, [0.0])
        assert len(samples) == 1
        assert samples[0].t == 0.0
        assert samples[0].osculating.a == pytest.approx(test_elements.a, abs=1e-2)

    def test_keplerian_limit_matches_reference(self, theory2, test_elements, consts):
        kepler = consts.without_perturbation()
        grid = time_grid(DAY, 600.0)
        reference = propagate_osculating(test_elements, kepler, grid)
        semianalytic = semianalytic_pipeline(test_elements, theory2, TheoryConfig(2, 1), kepler, grid)
        for ref, test in zip(reference, semianalytic):
            assert np.linalg.norm(ref.position - test.position) < 1e-6

    def test_deterministic_export(self, theory2, test_elements, consts, tmp_path):
        grid = time_grid(DAY / 4, 300.0)
        paths = []
        for index in range(2):
            samples = semianalytic_pipeline(test_elements, theory2, TheoryConfig(2, 1), consts, grid)
            paths.append(export_trajectory(samples, str(tmp_path / f'run{index}.csv')))
        with open(paths[0], 'rb') as first, open(paths[1], 'rb') as second:
            assert first.read() == second.read()
        frame = pd.read_csv(paths[0])
        assert list(frame.columns) == config.TRAJECTORY_COLUMNS
        assert len(frame) == 73


def run_campaign(file_name, artifacts_by_theory, out_dir, force_patched=False):
    scenarios = ScenarioLoader(os.path.join(SCENARIO_DIR, file_name), force_patched).load()
    results = {}
    for scenario in scenarios:
        campaign = PropagationCampaign(scenario, artifacts_by_theory[scenario.theory_config.theory],
                                       str(out_dir))
        results[scenario.theory_config.theory] = campaign
        campaign.run()
    return results


@pytest.fixture(scope='module')
def first_order_campaigns(theory1, theory2, tmp_path_factory):
    artifacts = {Theory.PURE_PERIODIC_TRANSFORMATION: theory1, Theory.PURE_PERIODIC_GENERATOR: theory2}
    return run_campaign('fig2.yaml', artifacts, tmp_path_factory.mktemp('first_order'))


@pytest.fixture(scope='module')
def second_order_artifacts(theory1_third, theory2_third):
    return {Theory.PURE_PERIODIC_TRANSFORMATION: theory1_third,
            Theory.PURE_PERIODIC_GENERATOR: theory2_third}


@pytest.fixture(scope='module')
def unpatched(second_order_artifacts, tmp_path_factory):
    return run_campaign('fig5.yaml', second_order_artifacts, tmp_path_factory.mktemp('second_order'))


@pytest.fixture(scope='module')
def patched(second_order_artifacts, tmp_path_factory):
    return run_campaign('fig6.yaml', second_order_artifacts, tmp_path_factory.mktemp('patched'))


class TestFirstOrderCampaign:

    def test_position_errors_tens_of_meters(self, first_order_campaigns):
        envelopes = [c.analyzer.envelope('rss') for c in first_order_campaigns.values()]
        for envelope in envelopes:
            assert 1e-3 <= envelope <= 0.1
        assert max(envelopes) < 10 * min(envelopes)

    def test_semimajor_axis_bias(self, first_order_campaigns):
        theory1_bias = first_order_campaigns[Theory.PURE_PERIODIC_TRANSFORMATION].analyzer.average('a')
        theory2_bias = first_order_campaigns[Theory.PURE_PERIODIC_GENERATOR].analyzer.average('a')
        assert abs(theory1_bias) <= 0.05e-3
        assert 1e-3 <= abs(theory2_bias) <= 10e-3

    def test_files_written(self, first_order_campaigns):
        for campaign in first_order_campaigns.values():
            assert set(campaign.files) == {'reference', 'semianalytic', 'errors'}
            for path in campaign.files.values():
                assert os.path.exists(path)
            errors = pd.read_csv(campaign.files['errors'])
            assert list(errors.columns) == config.ERROR_COLUMNS
            assert len(errors) == 865


@pytest.mark.slow
class TestSecondOrderCampaigns:

    def test_submeter_first_days(self, unpatched):
        for campaign in unpatched.values():
            assert campaign.analyzer.envelope('rss', 0.0, 3 * DAY) <= 1e-3
            distance = np.linalg.norm(campaign.reference[0].position)
            assert campaign.analyzer.envelope('rss', 0.0, 3 * DAY) / distance < 1e-6

    def test_semimajor_axis_error_at_centimeter_level(self, unpatched):
        for campaign in unpatched.values():
            amplitude = campaign.analyzer.envelope('a', 0.0, 3 * DAY)
            assert 1e-7 <= amplitude <= 1e-4

    def test_theory1_bias_below_millimeter(self, unpatched):
        window = [r.value('a') for r in unpatched[Theory.PURE_PERIODIC_TRANSFORMATION].analyzer.records
                  if r.t <= 3 * DAY]
        assert abs(np.mean(window)) < 1e-6

    def test_along_track_growth(self, unpatched):
        theory1 = unpatched[Theory.PURE_PERIODIC_TRANSFORMATION].analyzer
        theory2 = unpatched[Theory.PURE_PERIODIC_GENERATOR].analyzer
        assert theory1.envelope('along', 20 * DAY, 21 * DAY) >= 5 * theory1.envelope('along', 6 * DAY, 7 * DAY)
        assert theory2.envelope('along', 20 * DAY, 21 * DAY) < 2 * theory2.envelope('along', 6 * DAY, 7 * DAY)

    def test_patch_restores_theory1(self, patched):
        theory1 = patched[Theory.PURE_PERIODIC_TRANSFORMATION].analyzer
        theory2 = patched[Theory.PURE_PERIODIC_GENERATOR].analyzer
        late1 = theory1.envelope('along', 20 * DAY, 21 * DAY)
        late2 = theory2.envelope('along', 20 * DAY, 21 * DAY)
        assert late1 <= 3 * late2

    def test_patch_is_no_op_for_theory2(self, unpatched, patched):
        plain = unpatched[Theory.PURE_PERIODIC_GENERATOR].files['semianalytic']
        forced = patched[Theory.PURE_PERIODIC_GENERATOR].files['semianalytic']
        with open(plain, 'rb') as first, open(forced, 'rb') as second:
            assert first.read() == second.read()
