"""Exception types raised across the package."""


class RefocusError(Exception):
    """Base class for all package errors."""


class InvalidShape(RefocusError, ValueError):
    pass


class QuadratureError(RefocusError, ArithmeticError):
    pass


class InvalidModel(RefocusError, ValueError):
    pass


class InvalidArgument(RefocusError, ValueError):
    pass


class NotConverged(RefocusError, RuntimeError):
    """An iterative or step-refined computation missed its tolerance.

    ``result`` carries the best available value when one exists.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class BranchCutAmbiguity(RefocusError, ArithmeticError):
    """An eigenphase sits too close to the branch cut of the logarithm."""

    def __init__(self, message, tau_p=None):
        super().__init__(message)
        self.tau_p = tau_p


class ParseError(RefocusError, ValueError):
    pass


class PreconditionViolated(RefocusError, ValueError):
    pass


class NotInCatalog(RefocusError, KeyError):
    pass
