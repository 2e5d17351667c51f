"""Fréchet (Karcher) mean of SPD matrices under the Fisher metric.

The solver is the classical Riemannian fixed-point / gradient iteration

    X_{k+1} = X_k^{1/2} · exp( (τ/N) Σ_i log(X_k^{-1/2} P_i X_k^{-1/2}) ) · X_k^{1/2}

started from the arithmetic mean, with step τ = 1 and backtracking whenever the
objective Σ_i d_F²(X, P_i) would increase.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mdtkit.common import MatrixLike, SpdMatrix
from mdtkit.exceptions import (
    DimensionMismatchError,
    EmptyInputError,
    NoConvergenceError,
)
from mdtkit.linalg import spd_function
from mdtkit.timer import Timer

_LOGGER = logging.getLogger(__name__)

_MAX_BACKTRACKS = 40
_DESCENT_SLACK = 1e-12


class KarcherConfig(BaseModel):
    """Knobs of the Karcher mean solver.

    Example:
    ```
    config = KarcherConfig(max_iterations=500, gradient_tolerance=1e-10)
    ```
    """

    max_iterations: int = Field(default=200, ge=1)
    """Iteration budget. `NoConvergenceError` is raised when it's exhausted."""

    gradient_tolerance: float = Field(default=1e-12, gt=0)
    """Stop when ||mean whitened log||_F <= gradient_tolerance · max(1, spread), where the spread is
    the largest ||log(X^{-1/2} P_i X^{-1/2})||_F at the current iterate."""

    initial_step: float = Field(default=1.0, gt=0, le=1)
    """Step τ tried first at every iteration. 1.0 is the classical fixed-point step."""

    backtrack_factor: float = Field(default=0.5, gt=0, lt=1)
    """Factor applied to the step while the objective would increase."""

    model_config = ConfigDict(frozen=True)


class MeanResult(BaseModel):
    """The Fréchet mean of a set of SPD matrices and the solver diagnostics."""

    mean: SpdMatrix
    iterations: int
    """Number of accepted updates."""

    final_gradient_norm: float
    """Frobenius norm of the mean whitened log at the returned mean."""

    objective: float
    """Σ_i d_F²(mean, P_i)."""

    model_config = ConfigDict(frozen=True)


@Timer(name="karcher_mean", log_fn=_LOGGER.debug)
def karcher_mean(
    points: Sequence[MatrixLike], config: Optional[KarcherConfig] = None
) -> MeanResult:
    """Compute the Fréchet mean of SPD matrices under the Fisher metric.

    The mean is the unique minimizer of Σ_i d_F²(X, P_i). The N whitened logs of one iteration are
    computed as one batch and summed in input order, so results are reproducible.

    Parameters
    ----------
    points
        A non-empty list of SPD matrices of the same dimension. Duplicates act as weights.
    config
        Solver knobs, by default `KarcherConfig()`.

    Returns
    -------
    MeanResult
        The mean with the number of iterations, final gradient norm and objective.

    Raises
    ------
    EmptyInputError
        If `points` is empty.
    DimensionMismatchError
        If the points don't share the same dimension.
    NoConvergenceError
        If the gradient tolerance isn't reached within `config.max_iterations` updates.
    """
    config = config or KarcherConfig()
    stack = _stack_points(points)
    current = _symmetric(np.mean(stack, axis=0))
    logs = _whitened_logs(current, stack)
    objective = _objective(logs)
    for iteration in range(config.max_iterations + 1):
        gradient = np.sum(logs, axis=0) / len(stack)
        gradient_norm = float(np.linalg.norm(gradient))
        spread = float(np.max(np.linalg.norm(logs, axis=(1, 2))))
        _LOGGER.debug(
            f"Karcher iteration {iteration}: gradient norm {gradient_norm:.3e}, objective {objective:.12e}"
        )
        if gradient_norm <= config.gradient_tolerance * max(1.0, spread):
            _LOGGER.info(
                f"Karcher mean of {len(stack)} matrices converged after {iteration} iterations (gradient norm {gradient_norm:.3e})"
            )
            return MeanResult(
                mean=SpdMatrix(entries=current),
                iterations=iteration,
                final_gradient_norm=gradient_norm,
                objective=objective,
            )
        if iteration == config.max_iterations:
            break
        current, logs, objective = _descend(current, gradient, stack, objective, config)
    raise NoConvergenceError(
        f"Karcher mean did not reach the gradient tolerance {config.gradient_tolerance:.1e}",
        iterations=config.max_iterations,
        gradient_norm=gradient_norm,
        objective=objective,
        last_iterate=current,
    )


def geodesic_midpoint(p: MatrixLike, q: MatrixLike) -> SpdMatrix:
    """Midpoint P^{1/2}(P^{-1/2}·Q·P^{-1/2})^{1/2}P^{1/2} of the Fisher geodesic between P and Q.

    It is the two-point Fréchet mean, in closed form.
    """
    first = SpdMatrix.from_array(p).entries
    second = SpdMatrix.from_array(q).entries
    if first.shape != second.shape:
        raise DimensionMismatchError(
            f"Expecting matrices of the same dimension, but got shapes {first.shape} and {second.shape}"
        )
    sqrt_first = spd_function(first, np.sqrt)
    inverse_sqrt_first = spd_function(first, lambda values: 1.0 / np.sqrt(values))
    inner = _symmetric(inverse_sqrt_first @ second @ inverse_sqrt_first)
    return SpdMatrix(entries=sqrt_first @ spd_function(inner, np.sqrt) @ sqrt_first)


def frechet_objective(candidate: MatrixLike, points: Sequence[MatrixLike]) -> float:
    """Σ_i d_F²(candidate, P_i), the quantity the Fréchet mean minimizes."""
    center = SpdMatrix.from_array(candidate).entries
    if len(points) == 0:
        return 0.0
    stack = _stack_points(points)
    if stack.shape[1:] != center.shape:
        raise DimensionMismatchError(
            f"Candidate is {center.shape[0]}x{center.shape[0]}, but the points are {stack.shape[1]}x{stack.shape[1]}"
        )
    return _objective(_whitened_logs(center, stack))


def _descend(
    current: np.ndarray,
    gradient: np.ndarray,
    stack: np.ndarray,
    objective: float,
    config: KarcherConfig,
) -> Tuple[np.ndarray, np.ndarray, float]:
    sqrt_current = spd_function(current, np.sqrt)
    step = config.initial_step
    for _ in range(_MAX_BACKTRACKS):
        candidate = _symmetric(
            sqrt_current @ spd_function(step * gradient, np.exp) @ sqrt_current
        )
        candidate_logs = _whitened_logs(candidate, stack)
        candidate_objective = _objective(candidate_logs)
        if candidate_objective <= objective + _DESCENT_SLACK * max(1.0, objective):
            return candidate, candidate_logs, candidate_objective
        _LOGGER.debug(
            f"Objective would increase ({objective:.12e} -> {candidate_objective:.12e}) with step {step:.3e}, backtracking"
        )
        step *= config.backtrack_factor
    _LOGGER.warning(
        f"Backtracking exhausted after {_MAX_BACKTRACKS} tries, accepting step {step:.3e}"
    )
    return candidate, candidate_logs, candidate_objective


def _stack_points(points: Sequence[MatrixLike]) -> np.ndarray:
    if len(points) == 0:
        raise EmptyInputError("Expecting at least one SPD matrix, but got none")
    arrays: List[np.ndarray] = [SpdMatrix.from_array(p).entries for p in points]
    dims = {array.shape[0] for array in arrays}
    if len(dims) > 1:
        raise DimensionMismatchError(
            f"All the matrices must have the same dimension, but got dimensions {sorted(dims)}"
        )
    return np.stack(arrays)


def _whitened_logs(center: np.ndarray, stack: np.ndarray) -> np.ndarray:
    """log(X^{-1/2} P_i X^{-1/2}) for every P_i of the stack."""
    inverse_sqrt = spd_function(center, lambda values: 1.0 / np.sqrt(values))
    whitened = inverse_sqrt @ stack @ inverse_sqrt
    return spd_function(_symmetric(whitened), np.log)


def _objective(logs: np.ndarray) -> float:
    return float(np.sum(logs * logs))


def _symmetric(array: np.ndarray) -> np.ndarray:
    return (array + np.swapaxes(array, -1, -2)) / 2
