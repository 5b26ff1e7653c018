"""Exception taxonomy.

Validation errors signal bad inputs or configuration (CLI exit code 2),
numerical errors signal failures of the computation itself, such as leaving
the open set of immersions (exit code 3), and file errors cover malformed
on-disk data (exit code 4).
"""


class ImmersaError(Exception):
    """Base class for all package errors."""


class ValidationError(ImmersaError):
    """Bad input, configuration or argument combination."""


class BadSpec(ValidationError):
    """Malformed surface generator specification."""


class BadExponents(ValidationError):
    """Exponent relation of an inequality probe is violated."""


class TypeMismatch(ValidationError):
    """Tensor fields of incompatible type or grid were combined."""


class OrderTooHigh(ValidationError):
    """Requested derivative order exceeds the configured maximum."""


class UnsupportedAmbientDim(ValidationError):
    """Operation requires a specific ambient dimension (e.g. OBJ export needs d=3)."""


class NumericalError(ImmersaError):
    """A computation left its admissible domain."""


class ImmersionViolation(NumericalError):
    """Jacobian singular value dropped below the immersion floor."""


class WarpDegenerate(NumericalError):
    """Reparametrization warp lost orientation (det of its Jacobian <= 0)."""


class DomainViolation(NumericalError):
    """Sequence-space point left the open set (some coordinate hit zero)."""


class DegenerateSample(NumericalError):
    """Inequality ratio sample rejected: denominator below floor."""


class InfeasibleInitialization(NumericalError):
    """No admissible initial path between the given endpoints was found."""


class FileFormatError(ImmersaError):
    """Malformed GIF1/GIB1/GPF1 or CSV input."""
