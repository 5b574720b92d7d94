"""Exception hierarchy shared by all fluxshift modules."""


class FluxShiftError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FluxShiftError, ValueError):
    """Invalid parameters or configuration."""


class NumericalError(FluxShiftError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class FluxTooCloseToFrustration(NumericalError):
    """SQUID flux sits too close to a half-integer flux quantum.

    The Josephson inductance diverges there and the lumped model breaks down.
    """


class ZeroDetuning(NumericalError):
    """Dispersive comparator called with zero qubit-resonator detuning."""


class TruncationTooSmall(NumericalError):
    """Photon-number truncation discards more than the allowed tail mass."""


class SingularJacobian(NumericalError):
    """The least-squares Jacobian is rank deficient."""


class MaxIterationsExceeded(NumericalError):
    """The optimizer hit its iteration cap before converging."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NoPeakFound(NumericalError):
    """A spectrum column holds no peak above the contrast threshold."""


class GeometryOverlap(NumericalError):
    """Too many filament pairs fall inside the wire-radius regularization floor."""


class ConfigError(ValidationError):
    """A device configuration entry is missing, unknown, or malformed."""

    def __init__(self, key, message, unit=None):
        self.key = key
        self.unit = unit
        text = f"{key}: {message}"
        if unit:
            text += f" (expected unit: {unit})"
        super().__init__(text)
