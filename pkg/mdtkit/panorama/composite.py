"""Warp the images of a panorama onto one canvas."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import cv2
import numpy as np
from pydantic import BaseModel, ConfigDict

from mdtkit.common import AffineTransform
from mdtkit.exceptions import EmptyCanvasError
from mdtkit.panorama.correction import (
    CorrectionResult,
    PanoramaImage,
    PanoramaInput,
)
from mdtkit.timer import Timer

_LOGGER = logging.getLogger(__name__)

# Largest canvas side OpenCV's remapping supports.
MAX_CANVAS_SIDE = 32767
_SNAP_TOLERANCE = 1e-9


class CompositeResult(BaseModel):
    """The composited panorama."""

    canvas: np.ndarray
    """8-bit pixels of shape (height, width, 3) or (height, width, 4)."""

    origin: Tuple[int, int]
    """Plane coordinates (x, y) of the canvas pixel (0, 0)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def canvas_bounds(
    images: Sequence[PanoramaImage], transforms: Sequence[AffineTransform]
) -> Tuple[int, int, int, int]:
    """Integer bounds (x_min, y_min, x_max, y_max) of the pixel centers covering every transformed image corner.

    Bounds within 1e-9 of an integer are snapped to it, so a panorama shifted to the origin starts at pixel (0, 0).
    """
    if len(images) == 0:
        raise EmptyCanvasError("The panorama has no images to composite")
    corners = np.concatenate(
        [t.apply(image.corners()) for image, t in zip(images, transforms)]
    )
    if not np.all(np.isfinite(corners)):
        raise EmptyCanvasError("The transformed image corners are not finite")
    low = corners.min(axis=0)
    high = corners.max(axis=0)
    x_min, y_min = (math.floor(v + _SNAP_TOLERANCE) for v in low)
    x_max, y_max = (math.ceil(v - _SNAP_TOLERANCE) for v in high)
    if x_max < x_min or y_max < y_min:
        raise EmptyCanvasError(
            f"The panorama bounding box is degenerate: x in [{x_min}, {x_max}], y in [{y_min}, {y_max}]"
        )
    return x_min, y_min, x_max, y_max


@Timer(name="composite", log_fn=_LOGGER.debug)
def composite(
    panorama: PanoramaInput, corrected: Optional[CorrectionResult] = None
) -> CompositeResult:
    """Warp every image of a panorama onto one canvas.

    Each canvas pixel is inverse-mapped through the transform of an image and sampled with bilinear
    interpolation. A canvas pixel is covered by an image when its nearest source pixel lies inside
    the image. Overlaps go to the image that comes last. The images are warped in parallel and laid
    down in input order, so the output doesn't depend on the thread schedule.

    Parameters
    ----------
    panorama
        The images, all with pixels.
    corrected
        The corrected transforms to warp with. When None, the transforms of `panorama` are used as they are.

    Returns
    -------
    CompositeResult
        An RGB canvas with black background, or an RGBA canvas with a transparent background if any
        image has an alpha channel.

    Raises
    ------
    EmptyCanvasError
        If there's nothing to draw.
    """
    transforms = (
        corrected.corrected_transforms if corrected is not None else panorama.transforms
    )
    missing = [image.id for image in panorama.images if image.pixels is None]
    if missing:
        raise ValueError(f"Compositing needs the pixels of every image, missing: {missing}")
    x_min, y_min, x_max, y_max = canvas_bounds(panorama.images, transforms)
    width, height = x_max - x_min + 1, y_max - y_min + 1
    if max(width, height) > MAX_CANVAS_SIDE:
        raise ValueError(
            f"The canvas would be {width}x{height} pixels, larger than the {MAX_CANVAS_SIDE} pixels per side supported"
        )
    channels = 4 if any(image.pixels.shape[2] == 4 for image in panorama.images) else 3  # type: ignore[union-attr]
    _LOGGER.debug(
        f"Compositing {len(panorama.images)} images on a {width}x{height} canvas with origin ({x_min}, {y_min})"
    )

    to_plane = AffineTransform(linear=np.eye(2), translation=[x_min, y_min])

    def warp(args: Tuple[PanoramaImage, AffineTransform]) -> Tuple[np.ndarray, np.ndarray]:
        image, transform = args
        return _warp(image, transform.inverse().compose(to_plane), (width, height), channels)

    with ThreadPoolExecutor() as executor:
        layers: List[Tuple[np.ndarray, np.ndarray]] = list(
            executor.map(warp, zip(panorama.images, transforms))
        )

    canvas = np.zeros((height, width, channels), dtype=np.uint8)
    for pixels, coverage in layers:
        covered = coverage > 0
        canvas[covered] = pixels[covered]
    return CompositeResult(canvas=canvas, origin=(x_min, y_min))


def _warp(
    image: PanoramaImage,
    canvas_to_source: AffineTransform,
    size: Tuple[int, int],
    channels: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Sample an image at every canvas pixel. Returns the sampled pixels and the coverage mask."""
    pixels: np.ndarray = image.pixels  # type: ignore[assignment]
    if pixels.shape[2] != channels:
        opaque = np.full(pixels.shape[:2] + (1,), 255, dtype=np.uint8)
        pixels = np.concatenate([pixels, opaque], axis=2)
    matrix = canvas_to_source.homogeneous()[:2]
    warped = cv2.warpAffine(
        np.ascontiguousarray(pixels),
        matrix,
        size,
        flags=cv2.INTER_LINEAR | cv2.WARP_INVERSE_MAP,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0,
    )
    footprint = np.ones(pixels.shape[:2], dtype=np.uint8)
    coverage = cv2.warpAffine(
        footprint,
        matrix,
        size,
        flags=cv2.INTER_NEAREST | cv2.WARP_INVERSE_MAP,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0,
    )
    return warped, coverage
