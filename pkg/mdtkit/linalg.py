"""Dense decompositions and matrix functions on which every other module is built.

All the functions are pure: they validate their inputs into the value types of
`mdtkit.common` and return new values.
"""

import logging
import math
from typing import Callable, Tuple

import numpy as np
import scipy.linalg

from mdtkit.common import (
    LowerTriangularPD,
    MatrixLike,
    OrthogonalMatrix,
    SpdMatrix,
    SquareMatrix,
    checked_singular_values,
)
from mdtkit.exceptions import (
    ConvergenceFailureError,
    MatrixOverflowError,
    NotPositiveDefiniteError,
    NotSymmetricError,
    ReflectionNotSupportedError,
    UnsupportedDimensionError,
)

_LOGGER = logging.getLogger(__name__)

# Largest / smallest eigenvalue whose exponential is a normal double.
_MAX_EXPONENT = math.log(np.finfo(np.float64).max)
_MIN_EXPONENT = math.log(np.finfo(np.float64).tiny)
_SYMMETRY_RTOL = 1e-12
_SMALL_ANGLE = 1e-8


def lq_decompose(a: MatrixLike) -> Tuple[LowerTriangularPD, OrthogonalMatrix]:
    """Decompose an invertible matrix into A = L·Q, with L lower triangular with a positive diagonal and Q orthogonal.

    The decomposition is unique. It is computed from the Householder QR decomposition of Aᵗ
    (Aᵗ = Q'R' gives A = R'ᵗQ'ᵗ), followed by flipping the signs of the columns of L and the
    matching rows of Q so that the diagonal of L is positive.

    Parameters
    ----------
    a
        An invertible square matrix.

    Returns
    -------
    Tuple[LowerTriangularPD, OrthogonalMatrix]
        The factors (L, Q).
    """
    array = SquareMatrix.from_array(a).entries
    checked_singular_values(array)
    q_t, r_t = scipy.linalg.qr(array.T)
    lower = np.tril(r_t.T)
    signs = np.where(np.diag(lower) < 0, -1.0, 1.0)
    lower = lower * signs[np.newaxis, :]
    orthogonal = q_t.T * signs[:, np.newaxis]
    return LowerTriangularPD(entries=lower), OrthogonalMatrix(entries=orthogonal)


def cholesky_factor(p: MatrixLike) -> LowerTriangularPD:
    """Return the Cholesky factor Φ⁻¹(P), the unique L in L_n^+ with L·Lᵗ = P."""
    array = SpdMatrix.from_array(p).entries
    try:
        lower = scipy.linalg.cholesky(array, lower=True)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(
            f"Cholesky decomposition hit a non-positive pivot: {e}"
        ) from e
    return LowerTriangularPD(entries=np.tril(lower))


def cholesky_map(l: MatrixLike) -> SpdMatrix:  # noqa: E741
    """Return the Cholesky map Φ(L) = L·Lᵗ."""
    array = LowerTriangularPD.from_array(l).entries
    return SpdMatrix(entries=array @ array.T)


def spd_eigen(p: MatrixLike) -> Tuple[np.ndarray, OrthogonalMatrix]:
    """Eigen-decomposition P = V·diag(λ)·Vᵗ of an SPD matrix.

    Returns
    -------
    Tuple[np.ndarray, OrthogonalMatrix]
        The eigenvalues in ascending order (all positive) and the eigenvectors as the columns of V.
    """
    values, vectors = _eigh(SpdMatrix.from_array(p).entries)
    if not values[0] > 0:
        raise NotPositiveDefiniteError(
            f"Matrix is not positive definite (smallest eigenvalue {values[0]:.3e})"
        )
    return values, OrthogonalMatrix(entries=vectors)


def spd_log(p: MatrixLike) -> SquareMatrix:
    """Principal matrix logarithm of an SPD matrix. The result is symmetric."""
    return SquareMatrix(entries=spd_function(SpdMatrix.from_array(p).entries, np.log))


def spd_exp(s: MatrixLike) -> SpdMatrix:
    """Matrix exponential of a symmetric matrix. The result is always SPD.

    Raises
    ------
    MatrixOverflowError
        If an eigenvalue of `s` leaves the exponent range of a double.
    """
    array = _symmetrized(SquareMatrix.from_array(s).entries)
    values, vectors = _eigh(array)
    if values[-1] > _MAX_EXPONENT or values[0] < _MIN_EXPONENT:
        raise MatrixOverflowError(
            f"Eigenvalues [{values[0]:.3e}, {values[-1]:.3e}] are outside the exponent range [{_MIN_EXPONENT:.1f}, {_MAX_EXPONENT:.1f}]"
        )
    return SpdMatrix(entries=(vectors * np.exp(values)) @ vectors.T)


def spd_sqrt(p: MatrixLike) -> SpdMatrix:
    """The unique SPD square root of an SPD matrix."""
    return SpdMatrix(entries=spd_function(SpdMatrix.from_array(p).entries, np.sqrt))


def spd_power(p: MatrixLike, exponent: float) -> SpdMatrix:
    """The SPD real power P^t, computed through the eigen-decomposition."""
    return SpdMatrix(
        entries=spd_function(
            SpdMatrix.from_array(p).entries, lambda values: values**exponent
        )
    )


def singular_values(a: MatrixLike) -> np.ndarray:
    """Singular values of an invertible matrix, in descending order.

    Raises
    ------
    SingularMatrixError
        If the matrix is singular or its condition number exceeds 1e12.
    """
    return checked_singular_values(SquareMatrix.from_array(a).entries)


def so_log(q: MatrixLike) -> SquareMatrix:
    """Principal logarithm of a rotation, a skew-symmetric matrix.

    In 2D the rotation angle is taken in (-π, π]. In 3D the inverse Rodrigues formula is used,
    with a separate branch for angles close to π where (R - Rᵗ) carries no axis information.

    Raises
    ------
    ReflectionNotSupportedError
        If `q` has determinant -1.
    UnsupportedDimensionError
        If `q` is larger than 3×3.
    """
    rotation = OrthogonalMatrix.from_array(q)
    if rotation.determinant_sign < 0:
        raise ReflectionNotSupportedError(
            "The logarithm is only defined for rotations, but the matrix has determinant -1"
        )
    r = rotation.entries
    if rotation.dim == 1:
        return SquareMatrix(entries=np.zeros((1, 1)))
    if rotation.dim == 2:
        theta = math.atan2(r[1, 0], r[0, 0])
        if theta <= -math.pi:
            theta = math.pi
        return SquareMatrix(entries=[[0.0, -theta], [theta, 0.0]])
    if rotation.dim == 3:
        return SquareMatrix(entries=_so3_log(r))
    raise UnsupportedDimensionError(
        f"Rotation logarithm is supported up to 3D, but got a {rotation.dim}D rotation"
    )


def so_exp(w: MatrixLike) -> OrthogonalMatrix:
    """Exponential of a skew-symmetric matrix, a rotation."""
    array = SquareMatrix.from_array(w).entries
    skew = (array - array.T) / 2
    return OrthogonalMatrix(entries=scipy.linalg.expm(skew))


def spd_function(
    array: np.ndarray, function: Callable[[np.ndarray], np.ndarray]
) -> np.ndarray:
    """Apply a scalar function to the eigenvalues of symmetric matrices, V·diag(f(λ))·Vᵗ.

    Works on a single (n, n) array or a stack of shape (k, n, n). No validation is done: this is the
    building block of the functions above and of the solvers.
    """
    values, vectors = _eigh(array)
    return (vectors * function(values)[..., np.newaxis, :]) @ np.swapaxes(
        vectors, -1, -2
    )


def _eigh(array: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    try:
        return np.linalg.eigh(array)
    except np.linalg.LinAlgError as e:
        raise ConvergenceFailureError(
            f"Symmetric eigensolver did not converge: {e}"
        ) from e


def _symmetrized(array: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.abs(array)))
    asymmetry = float(np.max(np.abs(array - array.T)))
    if asymmetry > _SYMMETRY_RTOL * max(scale, 1.0):
        raise NotSymmetricError(
            f"Expecting a symmetric matrix, but max |S - Sᵗ| = {asymmetry:.3e}"
        )
    return (array + array.T) / 2


def _so3_log(r: np.ndarray) -> np.ndarray:
    # axis·2sin(θ) from the skew part, cos(θ) from the trace
    vee = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    cos_theta = (np.trace(r) - 1.0) / 2.0
    sin_theta = np.linalg.norm(vee) / 2.0
    theta = math.atan2(sin_theta, cos_theta)
    if theta < _SMALL_ANGLE:
        return (r - r.T) / 2
    if theta < math.pi / 2:
        return theta / (2.0 * sin_theta) * (r - r.T)
    # (R + Rᵗ)/2 - cos(θ)·I = (1 - cos(θ))·a·aᵗ
    outer = (r + r.T) / 2 - cos_theta * np.eye(3)
    k = int(np.argmax(np.diag(outer)))
    axis = outer[:, k] / math.sqrt(outer[k, k] * (1.0 - cos_theta))
    if np.dot(axis, vee) < 0:
        axis = -axis
    axis = axis / np.linalg.norm(axis)
    return theta * np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
