"""Exception and warning types shared across the package."""


class CavityBECError(Exception):
    """Base class for all package errors."""

    #: exit code used by the command line front end
    exit_code = 3


class ParameterError(CavityBECError, ValueError):
    """Invalid or inconsistent input parameters."""

    exit_code = 2

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class UnknownPreset(CavityBECError, KeyError):
    exit_code = 2

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown preset"


class NumericError(CavityBECError, ArithmeticError):
    """A numerical condition that prevents a result from being defined."""


class NoStableBranch(NumericError):
    pass


class AmbiguousBranch(NumericError):
    pass


class InconsistentStability(NumericError):
    """Routh-Hurwitz and eigenvalue stability verdicts disagree."""


class OverdampedMode(NumericError):
    pass


class ComplexRoot(NumericError):
    pass


class NegativeSquare(NumericError):
    pass


class PoleOnGrid(NumericError):
    pass


class SingularResolvent(NumericError):
    pass


class EmptyCurve(NumericError):
    pass


class OutOfRange(NumericError):
    pass


class AmbiguousEstimate(NumericError):
    def __init__(self, message, preimages=()):
        super().__init__(message)
        self.preimages = list(preimages)


class RegimeWarning(UserWarning):
    """Working point outside the single-mode Bogoliubov validity regime."""


class BranchFallbackWarning(UserWarning):
    pass


class ZeroCaaWarning(UserWarning):
    """Optimal homodyne phase undefined where the output C_aa vanishes."""


class StabilityWarning(UserWarning):
    pass
