"""Exception types shared across the package."""


class ModelError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(ModelError):
    """Invalid parameter combination or run specification."""


class IndexRangeError(ModelError):
    """Spectral index outside the truncation of a plan."""


class ShapeError(ModelError):
    """Array shape inconsistent with the plan it is used with."""


class UnsupportedGeometryError(ModelError):
    """Operation is only defined on a different geometry."""


class DivergenceError(ModelError):
    """Time integration produced a non-finite state."""

    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"non-finite state encountered at t={t:.6g}")


class DegenerateEnsembleError(ModelError):
    """Tangent ensemble collapsed to numerically dependent directions."""


class SnapshotError(ModelError):
    """Base class for snapshot serialization errors."""


class CorruptSnapshotError(SnapshotError):
    """Snapshot file failed structural or checksum validation."""


class SnapshotMismatchError(SnapshotError):
    """Snapshot metadata does not match the requested plan or parameters."""
