import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from logic import config
from logic.error_analysis import (ErrorAnalyzer, ErrorRecord, error_average, intrinsic_errors,
                                  intrinsic_frame, wrap_angle)
from logic.exceptions import DegenerateState, InputError
from logic.propagator import StateSample, make_sample
from logic.toy_model import OrbitalElements

vectors = st.lists(st.floats(-1e4, 1e4), min_size=3, max_size=3).map(np.array)


def sample_at(t, **changes):
    values = dict(a=9500.0, e=0.2, I=0.35, Omega=0.1, omega=0.5, M=0.8)
    values.update(changes)
    return make_sample(t, OrbitalElements(**values), config.MU_EARTH)


def record(t, rss=0.0, a=0.0):
    return ErrorRecord(t, rss, 0.0, 0.0, 0.0, (a, 0.0, 0.0, 0.0, 0.0, 0.0))


class TestIntrinsicFrame:

    @given(vectors, vectors)
    @settings(max_examples=60, deadline=None)
    def test_orthonormal(self, position, velocity):
        speed = np.linalg.norm(velocity)
        momentum = np.linalg.norm(np.cross(position, velocity))
        assume(np.linalg.norm(position) > 1.0 and speed > 1e-3)
        assume(momentum > 1e-6 and momentum > 1e-3 * np.linalg.norm(position) * speed)
        radial, along, cross = intrinsic_frame(position, velocity)
        basis = np.array([radial, along, cross])
        assert np.allclose(basis @ basis.T, np.eye(3), atol=1e-9)
        assert np.linalg.det(basis) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize('position,velocity', [
        ([7000.0, 0.0, 0.0], [3.0, 0.0, 0.0]),
        ([7000.0, 0.0, 0.0], [-1e3, 0.0, 0.0]),
        ([1.0, 2.0, -2.0], [0.5, 1.0, -1.0]),
        ([7000.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        ([0.0, 1.0, 1.0], [0.0, 0.0, 5e-148]),
    ])
    def test_vanishing_angular_momentum(self, position, velocity):
        with pytest.raises(DegenerateState):
            intrinsic_frame(np.array(position), np.array(velocity))


class TestIntrinsicErrors:

    def test_identical_samples(self):
        ref = sample_at(60.0)
        errors = intrinsic_errors(ref, ref)
        assert (errors.rss, errors.along, errors.radial, errors.cross) == (0.0, 0.0, 0.0, 0.0)
        assert errors.delta_elements == (0.0,) * 6

    def test_radial_offset(self):
        ref = sample_at(0.0)
        moved = StateSample(0.0, ref.osculating, ref.position * 1.001, ref.velocity)
        errors = intrinsic_errors(ref, moved)
        distance = np.linalg.norm(ref.position)
        assert errors.radial == pytest.approx(1e-3 * distance)
        assert errors.along == pytest.approx(0.0, abs=1e-9)
        assert errors.cross == pytest.approx(0.0, abs=1e-9)

    def test_components_add_up(self):
        errors = intrinsic_errors(sample_at(0.0), sample_at(0.0, M=0.8001, I=0.3501))
        components = errors.along**2 + errors.radial**2 + errors.cross**2
        assert components == pytest.approx(errors.rss**2, rel=1e-12)
        assert errors.rss > 0

    def test_angle_difference_is_wrapped(self):
        errors = intrinsic_errors(sample_at(0.0, M=0.01), sample_at(0.0, M=2 * math.pi - 0.01))
        assert errors.delta_elements[5] == pytest.approx(-0.02)

    def test_epoch_mismatch(self):
        with pytest.raises(InputError):
            intrinsic_errors(sample_at(0.0), sample_at(300.0))


class TestWrapAngle:

    @pytest.mark.parametrize('angle,expected', [
        (0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi / 2, -math.pi / 2),
        (-7.0, -7.0 + 2 * math.pi),
    ])
    def test_values(self, angle, expected):
        assert wrap_angle(angle) == pytest.approx(expected)

    @given(st.floats(-100.0, 100.0))
    def test_range(self, angle):
        wrapped = wrap_angle(angle)
        assert -math.pi - 1e-12 < wrapped <= math.pi + 1e-12
        assert math.remainder(wrapped - angle, 2 * math.pi) == pytest.approx(0.0, abs=1e-9)


class TestAverages:

    def test_metric_and_element_fields(self):
        records = [record(0.0, rss=1.0, a=0.002), record(300.0, rss=3.0, a=0.004)]
        assert error_average(records, 'rss') == 2.0
        assert error_average(records, 'a') == pytest.approx(0.003)
        assert error_average(records, 0) == pytest.approx(0.003)

    @pytest.mark.parametrize('field', ['x', 6, -1])
    def test_unknown_field(self, field):
        with pytest.raises(InputError):
            error_average([record(0.0)], field)

    def test_empty(self):
        with pytest.raises(InputError):
            error_average([], 'rss')


class TestErrorAnalyzer:

    def test_envelope_window(self):
        analyzer = ErrorAnalyzer([record(t, rss=t / 100.0) for t in (0.0, 100.0, 200.0, 300.0)])
        assert analyzer.envelope('rss') == 3.0
        assert analyzer.envelope('rss', 50.0, 250.0) == 2.0
        with pytest.raises(InputError):
            analyzer.envelope('rss', 400.0, 500.0)

    def test_envelope_uses_magnitude(self):
        analyzer = ErrorAnalyzer([record(0.0, a=-0.5), record(1.0, a=0.2)])
        assert analyzer.envelope('a') == 0.5

    def test_export(self, tmp_path):
        analyzer = ErrorAnalyzer([record(0.0), record(300.0, rss=1.5)])
        path = analyzer.export_csv(str(tmp_path / 'nested' / 'errors.csv'))
        frame = pd.read_csv(path)
        assert list(frame.columns) == config.ERROR_COLUMNS
        assert frame['rss_km'].tolist() == [0.0, 1.5]

    def test_summary_of_empty_run(self, capsys):
        ErrorAnalyzer([]).print_summary_statistics()
        assert 'No error records' in capsys.readouterr().out
