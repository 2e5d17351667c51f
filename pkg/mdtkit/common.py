"""Value types shared by every module: dense square matrices and their structured
subsets (SPD, lower triangular with positive diagonal, orthogonal), affine
transforms and distortion breakdowns."""

import math
from typing import Any, Optional, Sequence, Type, TypeVar, Union

import numpy as np
from scipy.linalg import solve_triangular
from pydantic import (
    BaseModel,
    ConfigDict,
    computed_field,
    field_validator,
    model_validator,
)

from mdtkit.exceptions import (
    ConvergenceFailureError,
    DimensionMismatchError,
    NotOrthogonalError,
    NotPositiveDefiniteError,
    NotSymmetricError,
    SingularMatrixError,
)

MAX_CONDITION_NUMBER = 1e12
"""Matrices with a larger condition number are treated as singular."""

# Inputs within this relative asymmetry are accepted. The stored entries are exactly symmetric.
_SYMMETRY_RTOL = 1e-8
_ORTHOGONALITY_ATOL = 1e-10

_M = TypeVar("_M", bound="SquareMatrix")

# Anything numpy can turn into a square matrix, or one of the typed matrices below.
MatrixLike = Union["SquareMatrix", np.ndarray, Sequence[Sequence[float]]]


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def checked_singular_values(array: np.ndarray) -> np.ndarray:
    """Return the singular values (descending) of a square array, raising `SingularMatrixError` if the array is not safely invertible."""
    try:
        values = np.linalg.svd(array, compute_uv=False)
    except np.linalg.LinAlgError as e:
        raise ConvergenceFailureError(f"SVD did not converge: {e}") from e
    if not values[-1] > 0 or values[0] > MAX_CONDITION_NUMBER * values[-1]:
        condition = values[0] / values[-1] if values[-1] > 0 else math.inf
        raise SingularMatrixError(
            f"Matrix is singular or too ill-conditioned (condition number {condition:.3e}, limit {MAX_CONDITION_NUMBER:.0e})"
        )
    return values


def quotient_singular_values(reference: np.ndarray, array: np.ndarray) -> np.ndarray:
    """Return the singular values (descending) of reference⁻¹·array.

    Both arrays must already have passed `checked_singular_values`. The quotient itself is not
    held to `MAX_CONDITION_NUMBER`: its condition number can reach the product of theirs. It only
    has to be invertible.
    """
    try:
        quotient = np.linalg.solve(reference, array)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(f"Reference matrix is singular: {e}") from e
    try:
        values = np.linalg.svd(quotient, compute_uv=False)
    except np.linalg.LinAlgError as e:
        raise ConvergenceFailureError(f"SVD did not converge: {e}") from e
    if not values[-1] > 0:
        raise SingularMatrixError(
            f"reference⁻¹·A is singular (smallest singular value {values[-1]:.3e})"
        )
    return values


class SquareMatrix(BaseModel):
    """A dense n×n real matrix with finite entries."""

    entries: np.ndarray
    """The matrix entries, a read-only float64 array of shape (dim, dim)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("entries", mode="before")
    @classmethod
    def _coerce_square(cls, value: Any) -> np.ndarray:
        if isinstance(value, SquareMatrix):
            value = value.entries
        array = np.array(value, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] != array.shape[1] or array.size == 0:
            raise ValueError(
                f"Expecting a non-empty square matrix, but got an array of shape {array.shape}"
            )
        if not np.all(np.isfinite(array)):
            raise ValueError("Matrix entries must be finite (no NaN or Inf)")
        return _read_only(array)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    @classmethod
    def from_array(cls: Type[_M], value: MatrixLike) -> _M:
        """Validate `value` as an instance of this class. Instances of the class are returned as they are."""
        if isinstance(value, cls):
            return value
        return cls(entries=value)

    @classmethod
    def identity(cls: Type[_M], dim: int) -> _M:
        return cls(entries=np.eye(dim))


class SpdMatrix(SquareMatrix):
    """A symmetric positive definite matrix, a point of the manifold P_n^+.

    The entries are symmetrized on construction, (P + Pᵗ) / 2, which absorbs the
    floating point asymmetry of products such as A·Aᵗ.
    """

    @field_validator("entries")
    @classmethod
    def _check_spd(cls, array: np.ndarray) -> np.ndarray:
        scale = float(np.max(np.abs(array)))
        asymmetry = float(np.max(np.abs(array - array.T)))
        if asymmetry > _SYMMETRY_RTOL * scale:
            raise NotSymmetricError(
                f"Matrix is not symmetric (max |P - Pᵗ| = {asymmetry:.3e}, scale {scale:.3e})"
            )
        symmetric = (array + array.T) / 2
        smallest = np.linalg.eigvalsh(symmetric)[0]
        if not smallest > 0:
            raise NotPositiveDefiniteError(
                f"Matrix is not positive definite (smallest eigenvalue {smallest:.3e})"
            )
        return _read_only(symmetric)


class LowerTriangularPD(SquareMatrix):
    """A lower triangular matrix with a strictly positive diagonal, an element of the group L_n^+."""

    @field_validator("entries")
    @classmethod
    def _check_lower_positive(cls, array: np.ndarray) -> np.ndarray:
        if np.any(np.triu(array, 1) != 0):
            raise ValueError("Entries above the diagonal must be exactly zero")
        if not np.all(np.diag(array) > 0):
            raise ValueError(
                f"Diagonal entries must be strictly positive, but got {np.diag(array)}"
            )
        return array

    def inverse(self) -> "LowerTriangularPD":
        """The inverse, which stays in L_n^+."""
        inverse = solve_triangular(self.entries, np.eye(self.dim), lower=True)
        return LowerTriangularPD(entries=np.tril(inverse))


class OrthogonalMatrix(SquareMatrix):
    """An orthogonal matrix (QQᵗ = I within 1e-10), an element of O_n."""

    @field_validator("entries")
    @classmethod
    def _check_orthogonal(cls, array: np.ndarray) -> np.ndarray:
        error = float(np.max(np.abs(array @ array.T - np.eye(array.shape[0]))))
        if error > _ORTHOGONALITY_ATOL:
            raise NotOrthogonalError(
                f"Matrix is not orthogonal (max |QQᵗ - I| = {error:.3e})"
            )
        return array

    @property
    def determinant_sign(self) -> int:
        """+1 for rotations, -1 for orientation reversing matrices."""
        return 1 if np.linalg.det(self.entries) > 0 else -1


class AffineTransform(BaseModel):
    """An affine map f(x) = A·x + b with an invertible linear part.

    Example:
    ```
    shift = AffineTransform(linear=np.eye(2), translation=[10.0, 0.0])
    shift.apply([[1.0, 2.0]])  # array([[11., 2.]])
    ```
    """

    linear: SquareMatrix
    """The linear part A."""

    translation: np.ndarray
    """The translation b, in units of the target coordinate frame."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("linear", mode="before")
    @classmethod
    def _coerce_linear(cls, value: Any) -> SquareMatrix:
        return SquareMatrix.from_array(value)

    @field_validator("translation", mode="before")
    @classmethod
    def _coerce_translation(cls, value: Any) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim != 1 or not np.all(np.isfinite(array)):
            raise ValueError(
                f"Translation must be a finite vector, but got {value!r}"
            )
        return _read_only(array)

    @model_validator(mode="after")
    def _check_consistent(self) -> "AffineTransform":
        if self.translation.shape[0] != self.linear.dim:
            raise DimensionMismatchError(
                f"Translation has length {self.translation.shape[0]}, but the linear part is {self.linear.dim}x{self.linear.dim}"
            )
        checked_singular_values(self.linear.entries)
        return self

    @property
    def dim(self) -> int:
        return self.linear.dim

    @classmethod
    def identity(cls, dim: int) -> "AffineTransform":
        return cls(linear=np.eye(dim), translation=np.zeros(dim))

    @classmethod
    def from_homogeneous(cls, matrix: np.ndarray) -> "AffineTransform":
        """Build a transform from a (dim+1)×(dim+1) homogeneous matrix. The last row is ignored."""
        matrix = np.asarray(matrix, dtype=np.float64)
        dim = matrix.shape[0] - 1
        return cls(linear=matrix[:dim, :dim], translation=matrix[:dim, dim])

    def homogeneous(self) -> np.ndarray:
        """The (dim+1)×(dim+1) homogeneous matrix of this transform."""
        matrix = np.eye(self.dim + 1)
        matrix[: self.dim, : self.dim] = self.linear.entries
        matrix[: self.dim, self.dim] = self.translation
        return matrix

    def compose(self, other: "AffineTransform") -> "AffineTransform":
        """Return self ∘ other, i.e. the map x -> self(other(x))."""
        if other.dim != self.dim:
            raise DimensionMismatchError(
                f"Can't compose a {self.dim}D transform with a {other.dim}D transform"
            )
        a = self.linear.entries
        return AffineTransform(
            linear=a @ other.linear.entries,
            translation=a @ other.translation + self.translation,
        )

    def inverse(self) -> "AffineTransform":
        inverse_linear = np.linalg.inv(self.linear.entries)
        return AffineTransform(
            linear=inverse_linear, translation=-inverse_linear @ self.translation
        )

    def apply(self, points: Union[np.ndarray, Sequence[Sequence[float]]]) -> np.ndarray:
        """Map an array of points of shape (k, dim)."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.linear.entries.T + self.translation


class DistortionBreakdown(BaseModel):
    """Fisher distortion of one linear map, with its angular / areal split when the map is 2D."""

    total: float
    """Fisher distortion sqrt(Σ log²σ_i)."""

    angular: Optional[float] = None
    """|log(σ₁/σ₂)|, the angular distortion. Only defined in 2D."""

    areal: Optional[float] = None
    """|log(σ₁σ₂)|, the area distortion. Only defined in 2D."""

    @computed_field  # type: ignore[misc]
    @property
    def airy_kavrayskiy(self) -> Optional[float]:
        """sqrt(angular² + areal²), the Airy-Kavrayskiy integrand of a single scale ellipse. Equals sqrt(2)·total."""
        if self.angular is None or self.areal is None:
            return None
        return math.hypot(self.angular, self.areal)
