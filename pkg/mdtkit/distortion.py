"""Fisher distortion of linear maps, the Fisher (affine-invariant) metric on SPD matrices,
its pullback to lower triangular matrices through the Cholesky map, and the 2D
angular / areal breakdown of the distortion."""

import math

import numpy as np

from mdtkit.common import (
    DistortionBreakdown,
    LowerTriangularPD,
    MatrixLike,
    SpdMatrix,
    SquareMatrix,
    checked_singular_values,
    quotient_singular_values,
)
from mdtkit.exceptions import DimensionMismatchError, UnsupportedDimensionError
from mdtkit.linalg import cholesky_map, singular_values, spd_function


def fisher_distortion(a: MatrixLike) -> float:
    """Fisher distortion sqrt(Σ log²σ_i) of an invertible linear map.

    It is zero exactly on orthogonal maps (rotations and reflections), invariant under
    multiplication by orthogonal matrices on either side, and the same for A and A⁻¹.
    """
    return float(np.linalg.norm(np.log(singular_values(a))))


def fisher_distance(p: MatrixLike, q: MatrixLike) -> float:
    """Affine-invariant distance ||log(P^{-1/2}·Q·P^{-1/2})||_F between two SPD matrices."""
    first = SpdMatrix.from_array(p).entries
    second = SpdMatrix.from_array(q).entries
    _check_same_dim(first, second)
    inverse_sqrt = spd_function(first, lambda values: 1.0 / np.sqrt(values))
    whitened = inverse_sqrt @ second @ inverse_sqrt
    whitened = (whitened + whitened.T) / 2
    return float(np.linalg.norm(np.log(np.linalg.eigvalsh(whitened))))


def pullback_distance(l1: MatrixLike, l2: MatrixLike) -> float:
    """Pullback of the Fisher metric to L_n^+ through the Cholesky map, d_F(L1·L1ᵗ, L2·L2ᵗ).

    It equals 2·fisher_distortion(L1⁻¹·L2).
    """
    first = LowerTriangularPD.from_array(l1)
    second = LowerTriangularPD.from_array(l2)
    _check_same_dim(first.entries, second.entries)
    return fisher_distance(cholesky_map(first), cholesky_map(second))


def distortion_breakdown(a: MatrixLike) -> DistortionBreakdown:
    """Fisher distortion of a map of any dimension. The angular / areal split is filled in 2D only."""
    matrix = SquareMatrix.from_array(a)
    if matrix.dim == 2:
        return distortion_breakdown_2d(matrix)
    return DistortionBreakdown(total=fisher_distortion(matrix))


def distortion_breakdown_2d(a: MatrixLike) -> DistortionBreakdown:
    """Split the Fisher distortion of a 2D map into angular and area distortion.

    With σ₁ ≥ σ₂ the singular values (the axes of the scale ellipse): angular = |log(σ₁/σ₂)|,
    areal = |log(σ₁σ₂)|, and angular² + areal² = 2·total².

    Raises
    ------
    UnsupportedDimensionError
        If the map is not 2D.
    """
    matrix = SquareMatrix.from_array(a)
    if matrix.dim != 2:
        raise UnsupportedDimensionError(
            f"The angular/areal breakdown is defined for 2D maps, but got a {matrix.dim}D map"
        )
    return _breakdown(singular_values(matrix))


def relative_distortion(reference: MatrixLike, a: MatrixLike) -> DistortionBreakdown:
    """Distortion breakdown of reference⁻¹·A, the map A seen from a reference frame.

    Both maps must be invertible within the condition number limit of `singular_values`; their
    quotient only has to be invertible.
    """
    reference_array = SquareMatrix.from_array(reference).entries
    array = SquareMatrix.from_array(a).entries
    _check_same_dim(reference_array, array)
    checked_singular_values(reference_array)
    checked_singular_values(array)
    return _breakdown(quotient_singular_values(reference_array, array))


def _breakdown(values: np.ndarray) -> DistortionBreakdown:
    logs = np.log(values)
    if len(logs) != 2:
        return DistortionBreakdown(total=float(np.linalg.norm(logs)))
    log_major, log_minor = float(logs[0]), float(logs[1])
    return DistortionBreakdown(
        total=math.hypot(log_major, log_minor),
        angular=abs(log_major - log_minor),
        areal=abs(log_major + log_minor),
    )


def _check_same_dim(first: np.ndarray, second: np.ndarray) -> None:
    if first.shape != second.shape:
        raise DimensionMismatchError(
            f"Expecting matrices of the same dimension, but got {first.shape[0]}x{first.shape[0]} and {second.shape[0]}x{second.shape[0]}"
        )
