"""Exception types shared across the package."""


class LacunaError(Exception):
    """Base class for all package errors."""


# -- algebra validation ------------------------------------------------------

class AntisymmetryViolation(LacunaError):
    pass


class JacobiViolation(LacunaError):
    pass


class GradingViolation(LacunaError):
    pass


class DimensionMismatch(LacunaError):
    pass


class NotStratified(LacunaError):
    pass


class DegenerateLayer(LacunaError):
    pass


# -- group / grid ------------------------------------------------------------

class NonpositiveScale(LacunaError):
    pass


class ConvergenceFailure(LacunaError):
    pass


class OutOfDomain(LacunaError):
    pass


class InvalidExponent(LacunaError):
    pass


# -- measures ----------------------------------------------------------------

class GaugeFailure(LacunaError):
    pass


class BandwidthTooSmall(LacunaError):
    pass


class NotAbelian(LacunaError):
    pass


class NotMeanZero(LacunaError):
    pass


# -- operators ---------------------------------------------------------------

class NotNormalized(LacunaError):
    pass


class SupportTooLarge(LacunaError):
    pass


class SignsIncomplete(LacunaError):
    pass


class WindowTooSmall(LacunaError):
    pass


# -- convex chord construction ----------------------------------------------

class KernelTooSmall(LacunaError):
    pass


class NoSignChange(LacunaError):
    pass


# -- CLI / config ------------------------------------------------------------

class ParseError(LacunaError):
    pass


class UnknownExperiment(LacunaError):
    pass


class MissingField(LacunaError):
    pass
