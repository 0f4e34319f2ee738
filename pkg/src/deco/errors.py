"""Exception hierarchy.

Input problems derive from :class:`InputError` (also a ``ValueError``);
numerical breakdowns derive from :class:`NumericalError`.  The CLI maps
the first family to exit code 2 and the second to exit code 3.
"""


class DecoError(Exception):
    """Base class for all package errors."""


class InputError(DecoError, ValueError):
    """Inputs violate a documented precondition."""


class NumericalError(DecoError, ArithmeticError):
    """A computation could not be completed to the requested accuracy."""


class SchemaError(InputError):
    """Unknown or missing field in a scenario document."""


class ValidationError(InputError):
    """A field is present but its value is invalid."""


class InvalidParameters(InputError):
    pass


class IncompatibleGrids(InputError):
    pass


class ChannelCollision(InputError):
    pass


class KernelSystemMismatch(InputError):
    pass


class DimensionTooLarge(InputError):
    pass


class HermiticityViolation(NumericalError):
    pass


class NonHermitianInput(NumericalError):
    pass


class NonPositiveKernel(NumericalError):
    """Raised by the CLI when a kernel that should be positive is not."""


class GridTooCoarse(NumericalError):
    pass


class DampingVanishes(NumericalError):
    pass


class DecompositionResidualTooLarge(NumericalError):
    pass


class ExponentialDivergence(NumericalError):
    pass


class StepSizeTooLarge(NumericalError):
    pass


class TruncationError(NumericalError):
    pass


class NonPositiveKernelWarning(UserWarning):
    """The sampled kernel Gram matrix failed the positivity check."""


class IoError(DecoError, OSError):
    """A report or input file cannot be read or written (exit code 1)."""
