"""Module that defines all the exceptions raised by the package."""

from typing import Any, Optional


class MdtError(Exception):
    """Base class of every error raised by mdtkit. It carries a human readable message."""

    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)

    def __str__(self) -> str:
        return self.message


class SingularMatrixError(MdtError):
    """Exception raised when a matrix is singular or too ill-conditioned to be treated as invertible (condition number above 1e12)."""


class NotPositiveDefiniteError(MdtError):
    """Exception raised when a matrix expected to be symmetric positive definite has a non-positive eigenvalue or Cholesky pivot."""


class NotSymmetricError(MdtError):
    """Exception raised when a matrix expected to be symmetric is asymmetric beyond floating point noise."""


class NotOrthogonalError(MdtError):
    """Exception raised when a matrix expected to be orthogonal does not satisfy QQᵗ = I within 1e-10."""


class ConvergenceFailureError(MdtError):
    """Exception raised when the symmetric eigensolver fails to converge."""


class MatrixOverflowError(MdtError):
    """Exception raised when a matrix exponential leaves the double precision exponent range."""


class ReflectionNotSupportedError(MdtError):
    """Exception raised when an orientation reversing matrix (negative determinant) reaches an operation that only supports rotations."""


class UnsupportedDimensionError(MdtError):
    """Exception raised when an operation is called with a dimension it does not support."""


class DimensionMismatchError(MdtError):
    """Exception raised when the operands of an operation don't share the same dimension."""


class EmptyInputError(MdtError):
    """Exception raised when an operation that needs at least one element receives none."""


class NoConvergenceError(MdtError):
    """Exception raised when the Karcher mean solver exhausts its iteration budget.

    The solver state at the time of the failure is attached for diagnostics.
    """

    def __init__(
        self,
        message: str,
        iterations: int,
        gradient_norm: float,
        objective: float,
        last_iterate: Optional[Any] = None,
    ):
        self.iterations = iterations
        self.gradient_norm = gradient_norm
        self.objective = objective
        self.last_iterate = last_iterate
        super().__init__(
            f"{message} (iterations: {iterations}, gradient norm: {gradient_norm:.3e}, objective: {objective:.6e})"
        )


class DegenerateConfigurationError(MdtError):
    """Exception raised when point correspondences don't determine an affine map (too few points, collinear points or a disconnected correspondence graph)."""


class EmptyCanvasError(MdtError):
    """Exception raised when the panorama canvas would have no pixels."""


class InvalidReferenceError(MdtError):
    """Exception raised when a reference choice is malformed or points to a transform that doesn't exist."""


class FileFormatError(MdtError):
    """Exception raised when an input file can't be parsed. The position of the error is attached when it's known."""

    def __init__(
        self, message: str, line: Optional[int] = None, column: Optional[int] = None
    ):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
