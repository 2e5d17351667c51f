"""PNG input and output of panorama images."""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import PIL.Image

from mdtkit.panorama.correction import PanoramaImage, PanoramaInput
from mdtkit.storage.files import TransformSet

_LOGGER = logging.getLogger(__name__)

_ALPHA_MODES = ("RGBA", "LA", "PA", "La", "RGBa")


def load_image(path: Union[str, Path]) -> np.ndarray:
    """Read an image file into an 8-bit RGB or RGBA array.

    Images with transparency (an alpha channel, or a palette with a transparent color) are
    read as RGBA, everything else as RGB.
    """
    with PIL.Image.open(path) as image:
        has_alpha = image.mode in _ALPHA_MODES or "transparency" in image.info
        converted = image.convert("RGBA" if has_alpha else "RGB")
        return np.array(converted, dtype=np.uint8)


def save_image(pixels: np.ndarray, path: Union[str, Path]) -> None:
    """Write an 8-bit RGB or RGBA array as a PNG file."""
    if pixels.dtype != np.uint8 or pixels.ndim != 3 or pixels.shape[2] not in (3, 4):
        raise ValueError(
            f"Expecting 8-bit RGB or RGBA pixels, but got {pixels.dtype} {pixels.shape}"
        )
    PIL.Image.fromarray(pixels).save(path, format="PNG")
    _LOGGER.info(f"Wrote {pixels.shape[1]}x{pixels.shape[0]} image to {path}")


def find_image(directory: Union[str, Path], id: str) -> Path:
    """Locate the file of image `id` in a directory: either the id itself or the id with a .png suffix."""
    directory = Path(directory)
    for candidate in (directory / id, directory / f"{id}.png"):
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"No image file for '{id}' in {directory}")


def panorama_input(
    transform_set: TransformSet, image_dir: Optional[Union[str, Path]] = None
) -> PanoramaInput:
    """Pair the transforms of a transform set with their images.

    With an image directory the pixels are loaded and the sizes come from the files. Without
    one, the sizes recorded in the transform set are used, and images without a recorded size
    are treated as a single pixel at their origin.
    """
    images: List[PanoramaImage] = []
    for record in transform_set.records:
        if image_dir is not None:
            images.append(
                PanoramaImage.from_pixels(record.id, load_image(find_image(image_dir, record.id)))
            )
        else:
            images.append(
                PanoramaImage(
                    id=record.id, width=record.width or 1, height=record.height or 1
                )
            )
    return PanoramaInput(images=images, transforms=transform_set.transforms)
