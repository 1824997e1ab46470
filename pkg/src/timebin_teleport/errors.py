"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid circuit, parameter record, pattern or run configuration."""


class NumericalError(ArithmeticError):
    """A linear-algebra step failed; signals an unphysical state upstream."""


class ResourceError(RuntimeError):
    """A configured size budget was exceeded."""


class UndefinedObservableError(ArithmeticError):
    """An observable's denominator vanished (zero heralding, zero reference rate)."""


class DegenerateDataError(ValueError):
    """Measured data cannot support the requested estimate."""


class FormatError(ValueError):
    """A stream or counts file does not match its declared layout."""


class BoundUndefinedError(ArithmeticError):
    """The decoy single-photon yield bound is not positive; the data are non-informative."""
