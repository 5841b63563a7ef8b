"""
Exceptions Module
Error families raised across the workbench, grouped by the exit status
the command line maps them to
"""


class MeanElemError(Exception):
    """Base class for every error raised by the workbench"""


# ============================================================================
# VERIFICATION FAILURES (exit status 1)
# ============================================================================

class VerificationError(MeanElemError):
    """A derived series or identity check did not match"""


class FixtureMismatch(VerificationError):
    """A derived series differs from its printed fixture"""

    def __init__(self, fixture_name, first_term):
        self.fixture_name = fixture_name
        self.first_term = first_term
        super().__init__(f"{fixture_name}: first mismatching term {first_term}")


# ============================================================================
# NUMERICAL FAILURES (exit status 2)
# ============================================================================

class NumericalError(MeanElemError):
    """Numerical or internal-consistency failure"""


class SingularEvaluation(NumericalError):
    """A denominator factor e or eta evaluated below the singular threshold"""


class NoConvergence(NumericalError):
    """Iterative solver exhausted its iteration budget"""


class StepFailure(NumericalError):
    """The integrator could not meet the requested tolerance"""


class DegenerateState(NumericalError):
    """Reference state cannot define an intrinsic frame"""


class NonPeriodicIntegrand(NumericalError):
    """integrate_M met a term constant in the mean anomaly"""


class UnsupportedDenominator(NumericalError):
    """A series operation produced a denominator outside e, eta, (1+eta) or a negative power of n"""


# ============================================================================
# BAD INPUT (exit status 3)
# ============================================================================

class InputError(MeanElemError, ValueError):
    """Invalid user-supplied input"""


class InvalidElements(InputError):
    """Orbital elements violate the element guards"""


class InvalidConfiguration(InputError):
    """Constants, integrator or theory settings out of range"""


class FrameMismatch(InputError):
    """Correction series evaluated with elements of the wrong frame"""


class FixtureError(InputError):
    """Printed-series fixture file cannot be read or parsed"""


class ScenarioError(InputError):
    """Scenario file is missing keys or holds invalid values"""


class CacheError(InputError):
    """Theory cache is missing or incomplete"""
