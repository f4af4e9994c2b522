"""Exception types shared across the package."""


class GraphActiveError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(GraphActiveError):
    """A caller-supplied parameter violates a documented precondition."""


class ResourceLimitError(GraphActiveError):
    """The requested computation exceeds the configured dense-size budget."""


class ConvergenceError(GraphActiveError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, grad_norm: float | None = None):
        super().__init__(message)
        self.grad_norm = grad_norm


class ComponentWithoutLabelError(GraphActiveError):
    """A connected component of the graph contains no labeled node."""


class InvalidQueryError(GraphActiveError):
    """The requested query index is not available (already labeled)."""


class EmptyPoolError(GraphActiveError):
    """No unlabeled candidates remain to score or select."""


class IdxFormatError(GraphActiveError):
    """An IDX file is malformed; the message names the failing byte offset."""
