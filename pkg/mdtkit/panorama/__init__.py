"""Affine panoramas: estimate the per-image transforms, re-reference them with the MDT and
composite the warped images."""

from .composite import CompositeResult, composite  # noqa: F401
from .correction import (  # noqa: F401
    CorrectionResult,
    DistortionReport,
    PanoramaImage,
    PanoramaInput,
    rereference,
    rereference_fixed,
    rotation_average,
)
from .estimate import Correspondence, estimate_affine, register_transforms  # noqa: F401
