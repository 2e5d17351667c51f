"""Distortion reports: how distorted a set of transforms is when seen from a chosen reference."""

import logging
import re
from typing import List, Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from mdtkit.common import AffineTransform, DistortionBreakdown, SquareMatrix
from mdtkit.distortion import relative_distortion
from mdtkit.exceptions import InvalidReferenceError
from mdtkit.frechet import KarcherConfig
from mdtkit.mdt import MdtResult, mdt, total_distortion
from mdtkit.panorama.correction import DistortionReport, central_index

_LOGGER = logging.getLogger(__name__)

_INDEX_PATTERN = re.compile(r"index:(-?\d+)")


class ReferenceChoice(BaseModel):
    """The reference a set of transforms is seen from.

    - `mdt`: the MDT of the set.
    - `identity`: the common plane as given.
    - `index`: the transform at `index`.
    - `central`: the transform whose translation is closest to the mean translation.
    """

    kind: Literal["mdt", "identity", "index", "central"]
    index: Optional[int] = None

    model_config = ConfigDict(frozen=True)

    @classmethod
    def parse(cls, text: str) -> "ReferenceChoice":
        """Parse `mdt`, `identity`, `central` or `index:<j>`."""
        value = text.strip()
        if value in ("mdt", "identity", "central"):
            return cls(kind=value)  # type: ignore[arg-type]
        match = _INDEX_PATTERN.fullmatch(value)
        if match is None:
            raise ValueError(
                f"Invalid reference '{text}'. Expecting one of: mdt, identity, central, index:<j>"
            )
        return cls(kind="index", index=int(match.group(1)))

    def __str__(self) -> str:
        return f"index:{self.index}" if self.kind == "index" else self.kind

    def resolve_index(self, transforms: Sequence[AffineTransform]) -> Optional[int]:
        """Index of the reference transform, or None for the `mdt` and `identity` choices."""
        if self.kind == "central":
            return central_index(transforms)
        if self.kind != "index":
            return None
        assert self.index is not None
        if not 0 <= self.index < len(transforms):
            raise InvalidReferenceError(
                f"Reference index {self.index} is out of range for {len(transforms)} transforms"
            )
        return self.index


class TransformDistortion(BaseModel):
    id: str
    distortion: DistortionBreakdown


class ReferenceReport(BaseModel):
    """Distortion of every transform of a set seen from one reference T, i.e. of T⁻¹·A_i."""

    reference: str
    reference_matrix: List[List[float]]
    per_transform: List[TransformDistortion]
    total: float
    """Σ_i Dist_F²(T⁻¹·A_i)."""


def build_reference_report(
    ids: Sequence[str],
    transforms: Sequence[AffineTransform],
    choice: ReferenceChoice,
    config: Optional[KarcherConfig] = None,
) -> ReferenceReport:
    """Report the distortion of a set of transforms under the chosen reference.

    Raises
    ------
    InvalidReferenceError
        If an `index:<j>` choice is out of range.
    """
    linear_parts = [t.linear for t in transforms]
    index = choice.resolve_index(transforms)
    if choice.kind == "mdt":
        reference = SquareMatrix.from_array(mdt(linear_parts, config).transform)
    elif index is None:
        reference = SquareMatrix.identity(transforms[0].dim if transforms else 2)
    else:
        reference = linear_parts[index]
    per_transform = [
        TransformDistortion(
            id=id,
            distortion=relative_distortion(reference, a),
        )
        for id, a in zip(ids, linear_parts)
    ]
    total = total_distortion(reference, linear_parts)
    _LOGGER.info(f"Total distortion under the '{choice}' reference: {total:.6e}")
    return ReferenceReport(
        reference=str(choice),
        reference_matrix=reference.entries.tolist(),
        per_transform=per_transform,
        total=total,
    )


def reference_table(report: ReferenceReport) -> pd.DataFrame:
    rows = [
        {
            "id": entry.id,
            "distortion": entry.distortion.total,
            "angular": entry.distortion.angular,
            "areal": entry.distortion.areal,
        }
        for entry in report.per_transform
    ]
    return pd.DataFrame(rows, columns=["id", "distortion", "angular", "areal"])


def correction_table(report: DistortionReport) -> pd.DataFrame:
    rows = [
        {
            "id": entry.id,
            "before": entry.before.total,
            "after": entry.after.total,
            "angular_before": entry.before.angular,
            "angular_after": entry.after.angular,
            "areal_before": entry.before.areal,
            "areal_after": entry.after.areal,
        }
        for entry in report.per_image
    ]
    return pd.DataFrame(
        rows,
        columns=[
            "id",
            "before",
            "after",
            "angular_before",
            "angular_after",
            "areal_before",
            "areal_after",
        ],
    )


def format_table(table: pd.DataFrame, totals: Sequence[str] = ()) -> str:
    """Render a table for the terminal, followed by summary lines."""
    text = table.to_string(index=False, float_format=lambda value: f"{value:.6f}", na_rep="-")
    return "\n".join([text, *totals])


def format_reference_report(report: ReferenceReport) -> str:
    return format_table(
        reference_table(report),
        [f"reference: {report.reference}", f"total (sum of squares): {report.total:.6f}"],
    )


def format_correction_report(report: DistortionReport) -> str:
    return format_table(
        correction_table(report),
        [
            f"total as given: {report.total_input:.6f}",
            f"total with best fixed reference ({report.chosen_fixed_baseline}): {report.total_before_best_fixed:.6f}",
            f"total after correction: {report.total_after:.6f}",
        ],
    )


def format_mdt_result(ids: Sequence[str], result: MdtResult) -> str:
    table = pd.DataFrame(
        {"id": list(ids), "objective_as_reference": result.baseline_objectives},
        columns=["id", "objective_as_reference"],
    )
    matrix = np.array2string(result.transform.entries, precision=6, suppress_small=True)
    return format_table(
        table,
        [
            f"MDT:\n{matrix}",
            f"MDT objective: {result.objective:.6f}",
            f"solver: {result.solver.iterations} iterations, gradient norm {result.solver.final_gradient_norm:.3e}",
        ],
    )
