"""Exception types shared across the package."""


class HolonetError(Exception):
    """Base class for all package errors."""


class DivergedEvaluationError(HolonetError):
    """A numeric evaluation produced a non-finite value."""


class ContractViolationError(HolonetError):
    """A caller-facing precondition was violated (e.g. non-real loss)."""


class UnsupportedOperationError(HolonetError):
    """Operation not available in this context (e.g. conj inside a jet)."""


class GeometryError(HolonetError):
    """Invalid or degenerate geometry, or a point where it must not be."""


class PointInsideHoleError(GeometryError):
    """Evaluation point too close to (or inside) a hole's guard region."""


class DivergenceError(HolonetError):
    """Training diverged; carries the epoch at which it happened."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(HolonetError):
    """Invalid run configuration."""
