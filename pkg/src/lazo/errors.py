"""Exception types shared across the package."""


class LazoError(Exception):
    """Base class for all package errors."""


class DimensionError(LazoError, ValueError):
    """A vector or matrix dimension is invalid or inconsistent."""


class ConfigError(LazoError, ValueError):
    """An estimator or run configuration is invalid."""


class SequencingError(LazoError, RuntimeError):
    """Operations were invoked out of their required order."""


class UnsupportedOperationError(LazoError, RuntimeError):
    """The object does not support the requested capability."""


class DegenerateInputError(LazoError, ValueError):
    """Inputs make the requested quantity vacuous (e.g. coincident points)."""


class TraceError(LazoError, ValueError):
    """A trajectory lacks the per-round fields a validator needs."""


class IntegrityError(LazoError, RuntimeError):
    """A replay does not reproduce the recorded loss sequence."""
