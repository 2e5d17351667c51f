"""Re-referencing of affine panoramas.

Each image i of a panorama is mapped to a common plane by an affine transform T_i. The plane
is only defined up to a global affine change of coordinates; `rereference` picks the one with
the least total Fisher distortion (the MDT of the linear parts) and then removes the
remaining rotation and offset with a rigid correction:

    corrected_i = S ∘ q ∘ T⁻¹ ∘ T_i

where T is the MDT, q the inverse of the average rotation of the re-referenced images and S
the shift that puts the panorama bounding box at the origin.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mdtkit.common import (
    AffineTransform,
    DistortionBreakdown,
    MatrixLike,
    OrthogonalMatrix,
)
from mdtkit.distortion import distortion_breakdown
from mdtkit.exceptions import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidReferenceError,
    ReflectionNotSupportedError,
    UnsupportedDimensionError,
)
from mdtkit.frechet import KarcherConfig
from mdtkit.linalg import lq_decompose, so_exp, so_log
from mdtkit.mdt import MdtResult, fixed_reference_objectives, mdt
from mdtkit.timer import Timer

_LOGGER = logging.getLogger(__name__)


class PanoramaImage(BaseModel):
    """One source image of a panorama. The pixel buffer is optional: it's only needed for compositing."""

    id: str
    """The identifier of the image, typically its file name."""

    width: int = Field(ge=1)
    """Width in pixels."""

    height: int = Field(ge=1)
    """Height in pixels."""

    pixels: Optional[np.ndarray] = None
    """8-bit RGB or RGBA pixels, of shape (height, width, 3 or 4)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("pixels")
    @classmethod
    def _check_pixels(cls, pixels: Optional[np.ndarray]) -> Optional[np.ndarray]:
        if pixels is None:
            return None
        if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] not in (3, 4):
            raise ValueError(
                f"Expecting 8-bit RGB or RGBA pixels of shape (height, width, 3|4), but got {pixels.dtype} {pixels.shape}"
            )
        return pixels

    @model_validator(mode="after")
    def _check_size(self) -> "PanoramaImage":
        if self.pixels is not None and self.pixels.shape[:2] != (self.height, self.width):
            raise ValueError(
                f"Image '{self.id}' is declared {self.width}x{self.height} but its pixels are {self.pixels.shape[1]}x{self.pixels.shape[0]}"
            )
        return self

    @classmethod
    def from_pixels(cls, id: str, pixels: np.ndarray) -> "PanoramaImage":
        return cls(id=id, width=pixels.shape[1], height=pixels.shape[0], pixels=pixels)

    def corners(self) -> np.ndarray:
        """Centers of the four corner pixels, as plane points (x, y) = (col, row)."""
        right, bottom = self.width - 1, self.height - 1
        return np.array(
            [[0.0, 0.0], [right, 0.0], [0.0, bottom], [right, bottom]], dtype=np.float64
        )


class PanoramaInput(BaseModel):
    """The images of a panorama and the transforms T_i mapping each image to the common plane."""

    images: List[PanoramaImage]
    transforms: List[AffineTransform]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_consistent(self) -> "PanoramaInput":
        if len(self.images) != len(self.transforms):
            raise ValueError(
                f"Expecting one transform per image, but got {len(self.images)} images and {len(self.transforms)} transforms"
            )
        for image, transform in zip(self.images, self.transforms):
            if transform.dim != 2:
                raise UnsupportedDimensionError(
                    f"Panorama transforms must be 2D, but the transform of '{image.id}' is {transform.dim}D"
                )
        return self

    @property
    def ids(self) -> List[str]:
        return [image.id for image in self.images]


class ImageDistortion(BaseModel):
    """Distortion of one image before and after the correction."""

    id: str
    before: DistortionBreakdown
    after: DistortionBreakdown


class DistortionReport(BaseModel):
    """How much the correction reduced the distortion of a panorama."""

    per_image: List[ImageDistortion]

    total_input: float
    """Σ Dist_F² of the transforms as given."""

    total_before_best_fixed: float
    """Σ Dist_F² under the best choice of a fixed reference image (T = T_j⁻¹)."""

    total_after: float
    """Σ Dist_F² of the corrected transforms."""

    chosen_fixed_baseline: str
    """Id of the image that is the best fixed reference."""


class CorrectionResult(BaseModel):
    """The corrected transforms of a panorama, with the pieces of the correction and its report."""

    corrected_transforms: List[AffineTransform]
    """corrected_i = S ∘ q ∘ T⁻¹ ∘ T_i, in input order."""

    mdt: Optional[MdtResult]
    """The MDT T. None when a fixed reference was used instead."""

    global_rotation: OrthogonalMatrix
    """The rotation q applied after re-referencing."""

    global_shift: np.ndarray
    """The shift S applied last."""

    report: DistortionReport

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


@Timer(name="rereference", log_fn=_LOGGER.debug)
def rereference(
    panorama: PanoramaInput, config: Optional[KarcherConfig] = None
) -> CorrectionResult:
    """Re-reference a panorama with the MDT of its linear parts and apply the rigid correction.

    Parameters
    ----------
    panorama
        The images and their transforms to the common plane. All linear parts must preserve
        orientation (positive determinant).
    config
        Knobs of the Fréchet mean solver, by default `KarcherConfig()`.

    Returns
    -------
    CorrectionResult
        The corrected transforms S ∘ q ∘ T⁻¹ ∘ T_i, the MDT T, q, S and the distortion report.

    Raises
    ------
    ReflectionNotSupportedError
        If a linear part has a non-positive determinant.
    """
    _check_not_empty(panorama)
    for image, transform in zip(panorama.images, panorama.transforms):
        if np.linalg.det(transform.linear.entries) <= 0:
            raise ReflectionNotSupportedError(
                f"The transform of image '{image.id}' reverses orientation (negative determinant). Mirrored images are not supported"
            )
    result = mdt([t.linear for t in panorama.transforms], config)
    mdt_inverse = AffineTransform(
        linear=np.linalg.inv(result.transform.entries), translation=np.zeros(2)
    )
    referenced = [mdt_inverse.compose(t) for t in panorama.transforms]
    rotation = rotation_average([rotation_factor(t.linear) for t in referenced])
    rigid = AffineTransform(linear=rotation, translation=np.zeros(2))
    rotated = [rigid.compose(t) for t in referenced]
    return _finish(panorama, rotated, rotation, result)


def rereference_fixed(
    panorama: PanoramaInput, reference_index: Optional[int] = None
) -> CorrectionResult:
    """Classical re-referencing with a fixed reference image: corrected_i = S ∘ T_j⁻¹ ∘ T_i.

    Parameters
    ----------
    panorama
        The images and their transforms to the common plane.
    reference_index
        The index j of the reference image. None keeps the plane as given and only applies the shift.
    """
    _check_not_empty(panorama)
    if reference_index is None:
        referenced = list(panorama.transforms)
    else:
        if not 0 <= reference_index < len(panorama.transforms):
            raise InvalidReferenceError(
                f"Reference index {reference_index} is out of range for {len(panorama.transforms)} images"
            )
        reference_inverse = panorama.transforms[reference_index].inverse()
        referenced = [reference_inverse.compose(t) for t in panorama.transforms]
    return _finish(panorama, referenced, OrthogonalMatrix.identity(2), None)


def rotation_factor(a: MatrixLike) -> OrthogonalMatrix:
    """The orthogonal factor q of A = q·R, with R upper triangular with a positive diagonal.

    It is read off the LQ decomposition of Aᵗ (Aᵗ = L·Q gives A = Qᵗ·Lᵗ). A global rotation g
    applied on the left turns it into g·q, which is what makes the rigid correction idempotent.
    """
    _, orthogonal = lq_decompose(np.asarray(_entries(a)).T)
    return OrthogonalMatrix(entries=orthogonal.entries.T)


def rotation_average(rotations: Sequence[MatrixLike]) -> OrthogonalMatrix:
    """Inverse of the log-average rotation, q = exp(-Σ log(q_i) / N).

    Parameters
    ----------
    rotations
        A non-empty list of 2D or 3D rotations of the same dimension.

    Raises
    ------
    ReflectionNotSupportedError
        If one of the matrices has determinant -1.
    UnsupportedDimensionError
        If the rotations are not 2D or 3D.
    """
    if len(rotations) == 0:
        raise EmptyInputError("Expecting at least one rotation, but got none")
    matrices = [OrthogonalMatrix.from_array(q) for q in rotations]
    dims = {q.dim for q in matrices}
    if len(dims) > 1:
        raise DimensionMismatchError(
            f"All the rotations must have the same dimension, but got dimensions {sorted(dims)}"
        )
    dim = dims.pop()
    if dim not in (2, 3):
        raise UnsupportedDimensionError(
            f"Rotation averaging supports 2D and 3D rotations, but got {dim}D rotations"
        )
    logs = np.stack([so_log(q).entries for q in matrices])
    if dim == 2:
        angles = logs[:, 1, 0]
        if np.max(angles) - np.min(angles) > math.pi:
            _LOGGER.warning(
                f"Rotations span {math.degrees(np.max(angles) - np.min(angles)):.1f} degrees, more than a half-circle; their average depends on the angle branch"
            )
    return so_exp(-np.sum(logs, axis=0) / len(matrices))


def global_shift(
    images: Sequence[PanoramaImage], transforms: Sequence[AffineTransform]
) -> np.ndarray:
    """The shift S that moves the bounding box of all the transformed image corners to the origin."""
    corners = np.concatenate(
        [t.apply(image.corners()) for image, t in zip(images, transforms)]
    )
    shift: np.ndarray = -np.min(corners, axis=0)
    return shift


def central_index(transforms: Sequence[AffineTransform]) -> int:
    """Index of the central frame, the transform whose translation is closest to the mean translation."""
    if len(transforms) == 0:
        raise EmptyInputError("Expecting at least one transform, but got none")
    translations = np.stack([t.translation for t in transforms])
    distances = np.linalg.norm(translations - translations.mean(axis=0), axis=1)
    return int(np.argmin(distances))


def _finish(
    panorama: PanoramaInput,
    referenced: List[AffineTransform],
    rotation: OrthogonalMatrix,
    result: Optional[MdtResult],
) -> CorrectionResult:
    shift = global_shift(panorama.images, referenced)
    translate = AffineTransform(linear=np.eye(2), translation=shift)
    corrected = [translate.compose(t) for t in referenced]
    report = distortion_report(panorama.ids, panorama.transforms, corrected)
    _LOGGER.info(
        f"Total distortion: {report.total_input:.6e} as given, {report.total_before_best_fixed:.6e} with the best fixed reference '{report.chosen_fixed_baseline}', {report.total_after:.6e} after correction"
    )
    return CorrectionResult(
        corrected_transforms=corrected,
        mdt=result,
        global_rotation=rotation,
        global_shift=shift,
        report=report,
    )


def distortion_report(
    ids: Sequence[str],
    before: Sequence[AffineTransform],
    after: Sequence[AffineTransform],
) -> DistortionReport:
    """Compare the distortion of a set of transforms before and after a correction."""
    before_breakdowns = [distortion_breakdown(t.linear) for t in before]
    after_breakdowns = [distortion_breakdown(t.linear) for t in after]
    baselines = fixed_reference_objectives([t.linear for t in before])
    best = int(np.argmin(baselines))
    return DistortionReport(
        per_image=[
            ImageDistortion(id=id, before=b, after=a)
            for id, b, a in zip(ids, before_breakdowns, after_breakdowns)
        ],
        total_input=sum(b.total**2 for b in before_breakdowns),
        total_before_best_fixed=baselines[best],
        total_after=sum(a.total**2 for a in after_breakdowns),
        chosen_fixed_baseline=ids[best],
    )


def _check_not_empty(panorama: PanoramaInput) -> None:
    if len(panorama.images) == 0:
        raise EmptyInputError("The panorama has no images")


def _entries(a: MatrixLike) -> np.ndarray:
    return np.asarray(a.entries if hasattr(a, "entries") else a, dtype=np.float64)
