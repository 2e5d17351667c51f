"""Least-squares estimation of panorama transforms from point correspondences."""

import logging
from typing import Dict, List, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from mdtkit.common import AffineTransform
from mdtkit.exceptions import (
    DegenerateConfigurationError,
    EmptyInputError,
    SingularMatrixError,
)
from mdtkit.timer import Timer

_LOGGER = logging.getLogger(__name__)

# Unknowns of one 2D affine map, in the order [a11, a12, b1, a21, a22, b2].
_PARAMETERS = 6
# A fit whose RMS residual exceeds this fraction of the extent of the points is suspicious.
_RESIDUAL_WARNING_RATIO = 0.05

PointPairs = Union[np.ndarray, Sequence[Sequence[float]]]


class Correspondence(BaseModel):
    """Matching points between two images: pixel (x, y) of `from_id` shows the same scene point as pixel (x', y') of `to_id`."""

    from_id: str
    to_id: str
    pairs: np.ndarray
    """Array of shape (k, 4), one row [x, y, x', y'] per matched point."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("pairs", mode="before")
    @classmethod
    def _coerce_pairs(cls, value: PointPairs) -> np.ndarray:
        return _as_pairs(value)


class AffineEstimate(BaseModel):
    """An estimated transform with the RMS residual of the fit, in target pixels."""

    transform: AffineTransform
    rms_residual: float

    model_config = ConfigDict(frozen=True)


class Registration(BaseModel):
    """The transforms of a jointly registered panorama.

    `transforms[id]` maps image `id` to the plane of the reference image, whose transform is the identity.
    """

    reference_id: str
    transforms: Dict[str, AffineTransform]
    rms_residuals: List[float]
    """RMS of ||T_from(p) - T_to(q)|| over the pairs of every correspondence, in input order."""

    model_config = ConfigDict(frozen=True)


def estimate_affine(pairs: PointPairs) -> AffineEstimate:
    """Estimate the affine map source -> target that best fits the given point pairs in the least-squares sense.

    Example:
    ```
    estimate = estimate_affine([[0, 0, 1, 2], [1, 0, 2, 2], [0, 1, 1, 3]])
    estimate.transform.translation  # array([1., 2.])
    ```

    Parameters
    ----------
    pairs
        Rows [x, y, x', y'], with (x, y) a source point and (x', y') the matching target point.
        At least 3 non-collinear source points are needed.

    Raises
    ------
    DegenerateConfigurationError
        If the source points don't determine an affine map (fewer than 3, or collinear), or if
        the best fit is not invertible.
    """
    array = _as_pairs(pairs)
    source, target = array[:, :2], array[:, 2:]
    design = np.hstack([source, np.ones((len(source), 1))])
    solution, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < 3:
        raise DegenerateConfigurationError(
            f"{len(source)} source points don't determine an affine map (rank {rank} < 3). Expecting at least 3 non-collinear points"
        )
    try:
        transform = AffineTransform(linear=solution[:2].T, translation=solution[2])
    except SingularMatrixError as e:
        raise DegenerateConfigurationError(
            f"The least-squares affine map is not invertible: {e}"
        ) from e
    residuals = transform.apply(source) - target
    rms = float(np.sqrt(np.mean(np.sum(residuals**2, axis=1))))
    _LOGGER.debug(f"Estimated affine map from {len(source)} pairs, RMS residual {rms:.3e}")
    _check_residual(rms, target, "the affine fit")
    return AffineEstimate(transform=transform, rms_residual=rms)


@Timer(name="register_transforms", log_fn=_LOGGER.debug)
def register_transforms(
    image_ids: Sequence[str],
    correspondences: Sequence[Correspondence],
    reference_id: str,
) -> Registration:
    """Solve T_from(p) = T_to(q) for all the correspondences of a panorama at once, in the least-squares sense.

    The transform of `reference_id` is fixed to the identity, which removes the global affine
    freedom of the system. Every other image contributes 6 unknowns.

    Parameters
    ----------
    image_ids
        The ids of all the images of the panorama. The order of the returned transforms follows it.
    correspondences
        Matched points between pairs of images.
    reference_id
        The image whose plane is the common plane.

    Raises
    ------
    DegenerateConfigurationError
        If the system doesn't determine every transform, e.g. an image isn't connected to the
        reference through correspondences or its points are collinear.
    """
    if len(image_ids) == 0:
        raise EmptyInputError("Expecting at least one image, but got none")
    if len(set(image_ids)) != len(image_ids):
        raise ValueError(f"Image ids must be unique, but got {list(image_ids)}")
    if reference_id not in image_ids:
        raise ValueError(
            f"Reference image '{reference_id}' is not one of the images {list(image_ids)}"
        )
    unknown_ids = [i for i in image_ids if i != reference_id]
    columns = {id: _PARAMETERS * k for k, id in enumerate(unknown_ids)}
    rows: List[np.ndarray] = []
    rhs: List[float] = []
    for correspondence in correspondences:
        for id in (correspondence.from_id, correspondence.to_id):
            if id not in image_ids:
                raise ValueError(
                    f"Correspondence between '{correspondence.from_id}' and '{correspondence.to_id}' refers to unknown image '{id}'"
                )
        for x, y, x2, y2 in correspondence.pairs:
            for axis in range(2):
                row = np.zeros(_PARAMETERS * len(unknown_ids))
                value = 0.0
                value -= _add_terms(row, columns, correspondence.from_id, axis, x, y, 1.0)
                value -= _add_terms(row, columns, correspondence.to_id, axis, x2, y2, -1.0)
                rows.append(row)
                rhs.append(value)

    transforms: Dict[str, AffineTransform] = {reference_id: AffineTransform.identity(2)}
    if unknown_ids:
        if not rows:
            raise DegenerateConfigurationError(
                f"No correspondences to register {len(unknown_ids)} images against '{reference_id}'"
            )
        system = np.stack(rows)
        solution, _, rank, _ = np.linalg.lstsq(system, np.array(rhs), rcond=None)
        if rank < system.shape[1]:
            raise DegenerateConfigurationError(
                f"Correspondences determine only {rank} of {system.shape[1]} transform parameters. Every image must be connected to '{reference_id}' through non-collinear matches"
            )
        for id, start in columns.items():
            a11, a12, b1, a21, a22, b2 = solution[start : start + _PARAMETERS]
            try:
                transforms[id] = AffineTransform(
                    linear=[[a11, a12], [a21, a22]], translation=[b1, b2]
                )
            except SingularMatrixError as e:
                raise DegenerateConfigurationError(
                    f"The registered transform of image '{id}' is not invertible: {e}"
                ) from e

    residuals = [_rms(c, transforms) for c in correspondences]
    for correspondence, rms in zip(correspondences, residuals):
        _LOGGER.info(
            f"Correspondence '{correspondence.from_id}' -> '{correspondence.to_id}': {len(correspondence.pairs)} pairs, RMS residual {rms:.3e}"
        )
        _check_residual(
            rms,
            correspondence.pairs[:, 2:],
            f"correspondence '{correspondence.from_id}' -> '{correspondence.to_id}'",
        )
    return Registration(
        reference_id=reference_id,
        transforms={id: transforms[id] for id in image_ids},
        rms_residuals=residuals,
    )


def _add_terms(
    row: np.ndarray,
    columns: Dict[str, int],
    id: str,
    axis: int,
    x: float,
    y: float,
    sign: float,
) -> float:
    """Add sign·T_id(x, y)[axis] to the row. Returns the constant part when T_id is the fixed reference."""
    if id not in columns:
        return sign * (x if axis == 0 else y)
    start = columns[id] + 3 * axis
    row[start : start + 3] += sign * np.array([x, y, 1.0])
    return 0.0


def _rms(correspondence: Correspondence, transforms: Dict[str, AffineTransform]) -> float:
    pairs = correspondence.pairs
    mapped_from = transforms[correspondence.from_id].apply(pairs[:, :2])
    mapped_to = transforms[correspondence.to_id].apply(pairs[:, 2:])
    return float(np.sqrt(np.mean(np.sum((mapped_from - mapped_to) ** 2, axis=1))))


def _check_residual(rms: float, points: np.ndarray, label: str) -> None:
    extent = float(np.max(np.ptp(points, axis=0)))
    if extent > 0 and rms > _RESIDUAL_WARNING_RATIO * extent:
        _LOGGER.warning(
            f"The RMS residual of {label} is {rms:.3e}, large compared to the {extent:.3e} extent of its points. Check for outliers or a non-affine motion"
        )


def _as_pairs(value: PointPairs) -> np.ndarray:
    array = np.array(value, dtype=np.float64)
    if array.ndim != 2 or array.shape[1] != 4 or array.shape[0] == 0:
        raise ValueError(
            f"Expecting point pairs of shape (k, 4) with rows [x, y, x', y'], but got shape {array.shape}"
        )
    if not np.all(np.isfinite(array)):
        raise ValueError("Point pairs must be finite (no NaN or Inf)")
    array.setflags(write=False)
    return array

