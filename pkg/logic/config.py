"""
Configuration file for the mean-element workbench
Contains all file paths, physical constants, tolerances and output settings
"""

import math
import os

# ============================================================================
# FILE PATHS
# ============================================================================

# Base directories
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(BASE_DIR, 'data')
RESULTS_DIR = os.path.join(BASE_DIR, 'results')

FIXTURES_FILE = os.path.join(DATA_DIR, 'fixtures', 'printed_series.yaml')
SCENARIO_DIR = os.path.join(DATA_DIR, 'scenarios')

# Theory cache (overridden by the environment variable, then by --cache)
CACHE_ENV_VAR = 'MEANELEM_CACHE'
DEFAULT_CACHE_DIR = os.path.join(BASE_DIR, 'cache')
CACHE_MANIFEST = 'manifest.yaml'
SERIES_SUFFIX = '.series'


def resolve_cache_dir(explicit=None):
    """Cache directory: explicit flag, then environment, then default"""
    if explicit:
        return explicit
    return os.environ.get(CACHE_ENV_VAR, DEFAULT_CACHE_DIR)


OUTPUT_FILES = {
    'reference': '{run}_reference.csv',
    'semianalytic': '{run}_semianalytic.csv',
    'errors': '{run}_errors.csv',
    'verification_matrix': 'verification_theory{theory}_order{order}.xlsx',
    'verification_report': 'verification_theory{theory}_order{order}.txt'
}

# ============================================================================
# PHYSICAL CONSTANTS (test case)
# ============================================================================

MU_EARTH = 398600.4415      # km^3/s^2
R_EARTH = 6378.1363         # km
J2 = 0.001082634

# ============================================================================
# TEST CASE
# ============================================================================

# a, e, I are the printed test case; the angles are not printed and are fixed here
TEST_CASE = {
    'a_km': 9500.0,
    'e': 0.2,
    'i_deg': 20.0,
    'raan_deg': 0.0,
    'argp_deg': 30.0,
    'M_deg': 45.0
}

# ============================================================================
# ELEMENT GUARDS
# ============================================================================

E_MIN = 0.05
SIN_I_MIN = 0.05
SINGULAR_DENOMINATOR = 1e-12

ELEMENT_NAMES = ('a', 'e', 'I', 'Omega', 'omega', 'M')
ANGLE_INDICES = (2, 3, 4, 5)
TWO_PI = 2.0 * math.pi

# ============================================================================
# DERIVATION SETTINGS
# ============================================================================

MAX_ORDER = 4

# Theory labels used in file names and reports
THEORY_LABELS = {
    1: 'pure periodic transformation',
    2: 'pure periodic generator'
}

# ============================================================================
# INTEGRATION SETTINGS
# ============================================================================

INTEGRATOR_METHOD = 'DOP853'
SUPPORTED_METHODS = ('DOP853', 'RK45')

REFERENCE_REL_TOL = 1e-12
REFERENCE_ABS_TOL = 1e-12
REFERENCE_MAX_STEP = 3600.0     # s

MEAN_REL_TOL = 1e-13
MEAN_ABS_TOL = 1e-13
MEAN_MAX_STEP = 43200.0         # s, "very long steps"

DEFAULT_SAMPLE_DT = 300.0       # s

# ============================================================================
# KEPLER SOLVER
# ============================================================================

KEPLER_MAX_ITER = 50
KEPLER_TOL = 1e-13
KEPLER_STEP_TOL = 1e-14

# ============================================================================
# CSV EXPORT SETTINGS
# ============================================================================

CSV_FLOAT_FORMAT = '%.12g'

TRAJECTORY_COLUMNS = [
    't_s', 'a_km', 'e', 'i_rad', 'raan_rad', 'argp_rad', 'M_rad',
    'x_km', 'y_km', 'z_km', 'vx_km_s', 'vy_km_s', 'vz_km_s'
]

ERROR_COLUMNS = [
    't_s', 'rss_km', 'along_km', 'radial_km', 'cross_km',
    'da_km', 'de', 'di_rad', 'draan_rad', 'dargp_rad', 'dM_rad'
]

# ============================================================================
# PROCESSING SETTINGS
# ============================================================================

# Progress reporting interval (print status every N samples)
PROGRESS_INTERVAL = 2000

# Maximum number of sample results to display
MAX_SAMPLE_DISPLAY = 5

# Enable/disable verbose logging
VERBOSE_MODE = True

# ============================================================================
# EXIT CODES
# ============================================================================

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_NUMERICAL = 2
EXIT_BAD_INPUT = 3
