"""The Mean Distorting Transformation (MDT) of a set of invertible linear maps.

The MDT is the reference T minimizing Σ_i Dist_F²(T⁻¹·A_i). It is found on the SPD cone:

1. P_i = A_i·A_iᵗ
2. P̄ = Fréchet mean of {P_i} under the Fisher metric
3. T = Φ⁻¹(P̄), the Cholesky factor of P̄

Any T·Q with Q orthogonal reaches the same objective; the lower triangular representative
with a positive diagonal is the one returned.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from mdtkit.common import (
    LowerTriangularPD,
    MatrixLike,
    SpdMatrix,
    SquareMatrix,
    checked_singular_values,
    quotient_singular_values,
)
from mdtkit.exceptions import DimensionMismatchError, EmptyInputError
from mdtkit.frechet import KarcherConfig, MeanResult, karcher_mean
from mdtkit.linalg import cholesky_factor
from mdtkit.timer import Timer

_LOGGER = logging.getLogger(__name__)


class MdtResult(BaseModel):
    """The MDT of a set of linear maps, with the objective it reaches and how it compares to fixed references."""

    transform: LowerTriangularPD
    """The canonical MDT, lower triangular with a positive diagonal."""

    objective: float
    """Σ_i Dist_F²(T⁻¹·A_i)."""

    baseline_objectives: List[float]
    """Objective reached when the input A_j is taken as the reference, for every j (input order)."""

    solver: MeanResult
    """Diagnostics of the Fréchet mean solver."""

    model_config = ConfigDict(frozen=True)

    @property
    def best_baseline_index(self) -> int:
        """Index of the input that is the best fixed reference."""
        return int(np.argmin(self.baseline_objectives))


@Timer(name="mdt", log_fn=_LOGGER.debug)
def mdt(
    transforms: Sequence[MatrixLike], config: Optional[KarcherConfig] = None
) -> MdtResult:
    """Compute the Mean Distorting Transformation of a set of invertible linear maps.

    Example:
    ```
    result = mdt([np.diag([4.0, 1.0]), np.eye(2)])
    result.transform.entries  # diag(2, 1), the geometric mean
    ```

    Parameters
    ----------
    transforms
        A non-empty list of invertible square matrices of the same dimension. Negative determinants
        are accepted; duplicates act as weights.
    config
        Knobs of the Fréchet mean solver, by default `KarcherConfig()`.

    Returns
    -------
    MdtResult
        The canonical MDT, its objective, the objectives of every fixed-reference choice and the
        solver diagnostics.
    """
    matrices = _linear_parts(transforms)
    grams = [SpdMatrix(entries=a @ a.T) for a in matrices]
    solver = karcher_mean(grams, config)
    transform = cholesky_factor(solver.mean)
    objective = total_distortion(transform, matrices)
    baselines = fixed_reference_objectives(matrices)
    _LOGGER.info(
        f"MDT of {len(matrices)} transforms: objective {objective:.6e}, best fixed reference #{int(np.argmin(baselines))} {min(baselines):.6e}"
    )
    return MdtResult(
        transform=transform,
        objective=objective,
        baseline_objectives=baselines,
        solver=solver,
    )


def total_distortion(reference: MatrixLike, transforms: Sequence[MatrixLike]) -> float:
    """Σ_i Dist_F²(reference⁻¹·A_i), the total squared Fisher distortion of a set of maps seen from a reference.

    The reference and every A_i must be invertible within `MAX_CONDITION_NUMBER`. The relative
    maps reference⁻¹·A_i only have to be invertible.
    """
    reference_array = SquareMatrix.from_array(reference).entries
    checked_singular_values(reference_array)
    if len(transforms) == 0:
        return 0.0
    matrices = _linear_parts(transforms)
    if matrices[0].shape != reference_array.shape:
        raise DimensionMismatchError(
            f"Reference is {reference_array.shape[0]}x{reference_array.shape[0]}, but the transforms are {matrices[0].shape[0]}x{matrices[0].shape[0]}"
        )
    return _total_distortion(reference_array, matrices)


def fixed_reference_objectives(transforms: Sequence[MatrixLike]) -> List[float]:
    """Total distortion obtained by taking each input as the reference, in input order."""
    matrices = _linear_parts(transforms)
    return [_total_distortion(reference, matrices) for reference in matrices]


def _total_distortion(reference: np.ndarray, matrices: Sequence[np.ndarray]) -> float:
    return float(
        sum(np.sum(np.log(quotient_singular_values(reference, a)) ** 2) for a in matrices)
    )


def _linear_parts(transforms: Sequence[MatrixLike]) -> List[np.ndarray]:
    if len(transforms) == 0:
        raise EmptyInputError("Expecting at least one transform, but got none")
    matrices = [SquareMatrix.from_array(t).entries for t in transforms]
    dims = {m.shape[0] for m in matrices}
    if len(dims) > 1:
        raise DimensionMismatchError(
            f"All the transforms must have the same dimension, but got dimensions {sorted(dims)}"
        )
    for m in matrices:
        checked_singular_values(m)
    return matrices
