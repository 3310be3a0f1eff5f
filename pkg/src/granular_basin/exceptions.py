"""Exception hierarchy.

Validation problems (bad potentials, bad configs, bad measures) derive from
``ValueError``; numerical failures derive from ``ArithmeticError`` so callers
can map them to distinct exit codes.
"""


class GranularError(Exception):
    """Base class for every error raised by this package."""


class PotentialError(GranularError, ValueError):
    pass


class DegreeTooLow(PotentialError):
    pass


class NotEven(PotentialError):
    pass


class NotDoubleWell(PotentialError):
    pass


class NegativeEvenDerivative(PotentialError):
    pass


class NotConvexAtInfinity(PotentialError):
    pass


class NonzeroAtOrigin(PotentialError):
    pass


class MeasureError(GranularError, ValueError):
    pass


class SupportMismatch(MeasureError):
    pass


class AllSamplesOutsideGrid(MeasureError):
    pass


class DegenerateCDF(MeasureError):
    pass


class ConfigError(GranularError, ValueError):
    """Malformed configuration; carries the offending key and line if known."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class NumericalError(GranularError, ArithmeticError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class DegenerateWeight(NumericalError):
    pass


class ScanWindowTooSmall(NumericalError):
    pass


class NoInteriorMax(NumericalError):
    pass


class BracketNotFound(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class EigenSolveFailed(NumericalError):
    pass


class NoPositiveSteadyMean(NumericalError):
    """Noise is at or above the critical level: only the symmetric steady state exists."""


class DeltaOutOfRange(GranularError, ValueError):
    pass


class BlowUp(NumericalError):
    pass


class CFLViolation(NumericalError):
    pass


class NegativeDensity(NumericalError):
    pass


class StabilityGuard(NumericalError):
    """Time step too large for the drift stiffness on the working window."""
