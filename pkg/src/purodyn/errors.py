"""Exception hierarchy shared by every purodyn module."""


class PurodynError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(PurodynError, ValueError):
    pass


class NonHermitianInput(PurodynError, ValueError):
    pass


class NonHermitianComponent(NonHermitianInput):
    pass


class InvalidDensityMatrix(PurodynError, ValueError):
    pass


class NonUnitaryBasis(PurodynError, ValueError):
    pass


class NonUnitaryTarget(PurodynError, ValueError):
    pass


class BlochNormExceeded(PurodynError, ValueError):
    pass


class LengthMismatch(PurodynError, ValueError):
    pass


class GridMismatch(PurodynError, ValueError):
    pass


class StepTooLarge(PurodynError, ValueError):
    pass


class StateInvariantViolated(PurodynError, RuntimeError):
    pass


class ObjectiveNonFinite(PurodynError, FloatingPointError):
    """Objective returned NaN/Inf. ``coordinates`` holds the offending point."""

    def __init__(self, message, coordinates=None):
        super().__init__(message)
        self.coordinates = coordinates


class UnsupportedNodeCount(PurodynError, ValueError):
    pass


class IndexOutOfRange(PurodynError, IndexError):
    pass


class ConfigInvalid(PurodynError, ValueError):
    """Raised for an invalid scenario config; ``diagnostics`` lists every problem."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))
