"""Exception types shared across the package."""


class RemitError(Exception):
    """Base class for all package errors."""


class ModelError(RemitError, ValueError):
    """A noise model or matrix violates its invariants, or a numeric
    operation on it cannot proceed (singular matrix, bad logarithm, ...)."""


class CalibrationError(RemitError, ValueError):
    """Calibration data is insufficient or inconsistent for the requested fit."""


class ConfigError(RemitError, ValueError):
    """Bad user-supplied configuration (CLI flags, config files, file schemas)."""
