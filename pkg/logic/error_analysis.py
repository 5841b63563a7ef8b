"""
Error Analysis Module
Position errors in the intrinsic frame of the reference orbit and element
differences between a reference and a test trajectory
"""

import math
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import config
from .exceptions import DegenerateState, InputError

METRICS = ('rss', 'along', 'radial', 'cross')
FRAME_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ErrorRecord:
    t: float
    rss: float
    along: float
    radial: float
    cross: float
    delta_elements: tuple

    def value(self, field):
        if field in METRICS:
            return getattr(self, field)
        if isinstance(field, str):
            if field not in config.ELEMENT_NAMES:
                raise InputError(f"unknown error field {field}")
            field = config.ELEMENT_NAMES.index(field)
        if not 0 <= field < 6:
            raise InputError(f"element index {field} outside 0..5")
        return self.delta_elements[field]


def wrap_angle(angle):
    """Reduce to (-pi, pi]"""
    return angle - config.TWO_PI * math.ceil((angle - math.pi) / config.TWO_PI)


def intrinsic_frame(position, velocity):
    """Radial, along-track and cross-track unit vectors of a state"""
    radial = position / np.linalg.norm(position)
    momentum = np.cross(position, velocity)
    norm = np.linalg.norm(momentum)
    if norm < FRAME_TOLERANCE:
        raise DegenerateState("angular momentum vanishes, intrinsic frame undefined")
    cross = momentum / norm
    along = np.cross(cross, radial)
    return radial, along, cross


def intrinsic_errors(ref, test):
    """Test-minus-reference errors projected on the reference intrinsic frame"""
    if ref.t != test.t:
        raise InputError(f"samples at different epochs: {ref.t} vs {test.t}")
    radial, along, cross = intrinsic_frame(ref.position, ref.velocity)
    delta = np.asarray(test.position) - np.asarray(ref.position)
    deltas = test.osculating.as_array() - ref.osculating.as_array()
    for index in config.ANGLE_INDICES:
        deltas[index] = wrap_angle(deltas[index])
    return ErrorRecord(
        t=ref.t,
        rss=float(np.linalg.norm(delta)),
        along=float(delta @ along),
        radial=float(delta @ radial),
        cross=float(delta @ cross),
        delta_elements=tuple(float(d) for d in deltas)
    )


def error_average(records, field):
    """Arithmetic mean of a metric or element difference over uniformly sampled records"""
    if not records:
        raise InputError("cannot average an empty record list")
    return float(np.mean([record.value(field) for record in records]))


class ErrorAnalyzer:
    """Error records of one propagation run with export and summary helpers"""

    def __init__(self, records):
        self.records = list(records)
        self.errors_df = None

    def to_dataframe(self):
        rows = [[r.t, r.rss, r.along, r.radial, r.cross, *r.delta_elements] for r in self.records]
        self.errors_df = pd.DataFrame(rows, columns=config.ERROR_COLUMNS)
        return self.errors_df

    def export_csv(self, path):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self.to_dataframe().to_csv(path, index=False, float_format=config.CSV_FLOAT_FORMAT)
        return path

    def average(self, field):
        return error_average(self.records, field)

    def envelope(self, field, t_from=None, t_to=None):
        """Largest absolute value of a field inside [t_from, t_to]"""
        window = [r.value(field) for r in self.records
                  if (t_from is None or r.t >= t_from) and (t_to is None or r.t <= t_to)]
        if not window:
            raise InputError(f"no samples between {t_from} and {t_to}")
        return float(np.max(np.abs(window)))

    def print_summary_statistics(self):
        if not self.records:
            print("⚠️  No error records to summarize")
            return
        print(f"\nSamples: {len(self.records)}")
        print(f"Max RSS position error: {self.envelope('rss') * 1000.0:.3f} m")
        print(f"Mean RSS position error: {self.average('rss') * 1000.0:.3f} m")
        for metric in ('along', 'radial', 'cross'):
            print(f"  Max |{metric}|: {self.envelope(metric) * 1000.0:.3f} m")
        print("\nElement error averages:")
        print(f"  a: {self.average('a') * 1000.0:.4f} m")
        for name in config.ELEMENT_NAMES[1:]:
            print(f"  {name}: {self.average(name):.3e}")
