"""
Logic Package
Contains all modules of the mean-element workbench
"""

from .series_algebra import PoissonSeries
from .toy_model import OrbitalElements, PhysicalConstants, ToyModel
from .lie_engine import LieEngine, Theory, TheoryArtifacts, TheoryCache
from .propagator import PropagationCampaign, SemiAnalyticModel, TheoryConfig
from .error_analysis import ErrorAnalyzer
from .data_loader import FixtureLoader, ScenarioLoader
from .comparator import FixtureComparator

__all__ = [
    'PoissonSeries',
    'OrbitalElements',
    'PhysicalConstants',
    'ToyModel',
    'LieEngine',
    'Theory',
    'TheoryArtifacts',
    'TheoryCache',
    'PropagationCampaign',
    'SemiAnalyticModel',
    'TheoryConfig',
    'ErrorAnalyzer',
    'FixtureLoader',
    'ScenarioLoader',
    'FixtureComparator'
]

__version__ = '1.0.0'
