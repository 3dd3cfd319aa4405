# levytype/errors.py
"""Exception hierarchy. Every class carries the CLI exit code and a short kind tag."""


class LevyTypeError(Exception):
    """Base class for all errors raised by this project."""
    exit_code = 1
    kind = "error"


class CheckFailed(LevyTypeError):
    """A validation suite ran to completion and at least one check failed."""
    kind = "check_failed"


# --- Invalid input (exit code 2) ---

class InvalidInput(LevyTypeError):
    exit_code = 2
    kind = "invalid_input"


class SchemaError(InvalidInput):
    """Custom exception for malformed JSON documents (triplets, run configs)."""
    kind = "schema"


class ConfigError(InvalidInput):
    kind = "config"


class DimensionMismatch(InvalidInput):
    kind = "dimension_mismatch"


class NotPositiveSemidefinite(InvalidInput):
    kind = "not_psd"


class InvalidAlpha(InvalidInput):
    kind = "invalid_alpha"


class InvalidRate(InvalidInput):
    kind = "invalid_rate"


class QuadratureDivergence(InvalidInput):
    kind = "quadrature_divergence"


class MassOverflow(InvalidInput):
    kind = "mass_overflow"


class RegionTouchesOrigin(InvalidInput):
    kind = "region_touches_origin"


class OutOfSemiring(InvalidInput):
    kind = "out_of_semiring"


class UnsupportedF(InvalidInput):
    kind = "unsupported_f"


class NotSquareIntegrable(InvalidInput):
    kind = "not_square_integrable"


class NonAdaptedCoefficient(InvalidInput):
    kind = "non_adapted_coefficient"


class LipschitzViolation(InvalidInput):
    kind = "lipschitz"


class EmptyEnsemble(InvalidInput):
    kind = "empty_ensemble"


class InvalidTestFunction(InvalidInput):
    kind = "invalid_test_function"


# --- Statistical preconditions (exit code 3) ---

class StatisticalPrecondition(LevyTypeError):
    exit_code = 3
    kind = "statistical_precondition"


class ExitDominates(StatisticalPrecondition):
    kind = "ExitDominates"


class Censored(StatisticalPrecondition):
    kind = "Censored"


class NoConvergence(StatisticalPrecondition):
    kind = "NoConvergence"


class TailNotResolved(StatisticalPrecondition):
    kind = "TailNotResolved"


class SlopeUnresolved(StatisticalPrecondition):
    kind = "SlopeUnresolved"


class IndexOrderViolation(SlopeUnresolved):
    kind = "IndexOrderViolation"


class Blowup(StatisticalPrecondition):
    """Raised when a simulated SDE path leaves the admissible range."""
    kind = "Blowup"

    def __init__(self, message, time=None, value=None):
        super().__init__(message)
        self.time = time
        self.value = value
