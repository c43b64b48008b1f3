"""Exception hierarchy shared across the package."""


class DriftmcError(Exception):
    """Base class for all errors raised by driftmc."""


class DimensionError(DriftmcError):
    """Array shapes do not match the grid or the driver dimension."""


class NonFiniteError(DriftmcError):
    """NaN or infinity found where a finite value is required."""


class UnsupportedConfigError(DriftmcError):
    """A requested combination of options has no implementation."""


class ModelValidationError(DriftmcError):
    """A model spec violates a structural invariant."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"model spec invalid: {lines}")


class SimulationError(DriftmcError):
    """A path blew up to a non-finite state during simulation."""

    def __init__(self, message, path_indices=()):
        self.path_indices = tuple(int(i) for i in path_indices)
        super().__init__(message)


class WeightOverflowError(DriftmcError):
    """A likelihood-ratio exponent exceeded the overflow guard."""


class ConfigError(DriftmcError):
    """A run configuration could not be parsed or resolved."""


class CheckpointError(DriftmcError):
    """A checkpoint file is malformed or fails its integrity check."""
