"""Exception hierarchy shared across the package."""


class ValidationError(ValueError):
    """Input data violates a structural requirement.

    ``where`` names the offending matrix, ``index`` the offending position
    (row, column) when there is one.
    """

    def __init__(self, message, where=None, index=None):
        super().__init__(message)
        self.where = where
        self.index = index


class DimensionMismatch(ValidationError):
    pass


class NonBinaryLabel(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class NegativeFeature(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class InvalidK(ValidationError):
    pass


class InvalidFoldCount(ValidationError):
    pass


class NoEvaluableSamples(ValueError):
    pass


class NumericalError(ArithmeticError):
    """Base class for failures of the numerical routines."""


class LineSearchFailed(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass
