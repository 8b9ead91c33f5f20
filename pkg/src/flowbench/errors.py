"""Exception hierarchy shared across the toolkit."""


class FlowbenchError(Exception):
    """Base class for all toolkit errors."""


class FeasibilityError(FlowbenchError):
    """A parameter combination cannot produce a valid geometry."""


class MeshingError(FlowbenchError):
    """Triangulation failed or would exceed its node budget."""


class SolverError(FlowbenchError):
    """A flow/heat solve failed to converge or produced invalid fields."""

    def __init__(self, message: str, step: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class AlignmentError(FlowbenchError):
    """Predictions and ground truth disagree in shape or mesh."""


class DatasetError(FlowbenchError):
    """Malformed dataset container, manifest, or split request."""


class ScoreError(FlowbenchError):
    """A score is undefined for the given inputs."""
