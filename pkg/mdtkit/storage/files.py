"""JSON files read and written by the command line: transform sets, correspondences, MDT
results and distortion reports.

Floats are written with Python's shortest round-trip representation, so every value
re-parses to the identical double. Keys keep a fixed order and the output is indented,
which makes the files byte-deterministic.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from mdtkit.common import AffineTransform
from mdtkit.exceptions import FileFormatError
from mdtkit.mdt import MdtResult
from mdtkit.panorama.estimate import Correspondence

_LOGGER = logging.getLogger(__name__)

FORMAT_VERSION = 1

PathLike = Union[str, Path]


class _TransformEntry(BaseModel):
    id: str
    A: List[List[float]]
    b: List[float]
    width: Optional[int] = Field(default=None, ge=1)
    height: Optional[int] = Field(default=None, ge=1)


class _TransformSetFile(BaseModel):
    version: int = FORMAT_VERSION
    dim: int = Field(ge=1)
    transforms: List[_TransformEntry]

    @model_validator(mode="after")
    def _check_entries(self) -> "_TransformSetFile":
        ids = [entry.id for entry in self.transforms]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Transform ids must be unique, but got {ids}")
        for entry in self.transforms:
            if len(entry.A) != self.dim or any(len(row) != self.dim for row in entry.A):
                raise ValueError(
                    f"Transform '{entry.id}': A must be {self.dim}x{self.dim}"
                )
            if len(entry.b) != self.dim:
                raise ValueError(
                    f"Transform '{entry.id}': b must have {self.dim} entries, but got {len(entry.b)}"
                )
        return self


class _CorrespondenceEntry(BaseModel):
    from_id: str
    to_id: str
    pairs: List[List[float]]


class _CorrespondenceFile(BaseModel):
    version: int = FORMAT_VERSION
    correspondences: List[_CorrespondenceEntry]


_Schema = TypeVar("_Schema", _TransformSetFile, _CorrespondenceFile)


class TransformRecord(BaseModel):
    """One entry of a transform set: the transform of image `id` and, optionally, the image size."""

    id: str
    transform: AffineTransform
    width: Optional[int] = None
    height: Optional[int] = None

    model_config = ConfigDict(frozen=True)


class TransformSet(BaseModel):
    """The content of a transform set file."""

    dim: int
    records: List[TransformRecord]

    model_config = ConfigDict(frozen=True)

    @property
    def ids(self) -> List[str]:
        return [record.id for record in self.records]

    @property
    def transforms(self) -> List[AffineTransform]:
        return [record.transform for record in self.records]

    @classmethod
    def from_transforms(
        cls,
        ids: Sequence[str],
        transforms: Sequence[AffineTransform],
        template: Optional["TransformSet"] = None,
    ) -> "TransformSet":
        """Build a transform set, keeping the image sizes of `template` when given."""
        sizes: Dict[str, TransformRecord] = (
            {record.id: record for record in template.records} if template else {}
        )
        records = [
            TransformRecord(
                id=id,
                transform=transform,
                width=sizes[id].width if id in sizes else None,
                height=sizes[id].height if id in sizes else None,
            )
            for id, transform in zip(ids, transforms)
        ]
        dim = transforms[0].dim if transforms else 2
        return cls(dim=dim, records=records)


def read_transform_set(path: PathLike) -> TransformSet:
    """Read a transform set file.

    Raises
    ------
    FileFormatError
        If the file isn't valid JSON or doesn't follow the transform set format.
    SingularMatrixError
        If a linear part isn't invertible.
    """
    parsed = _parse(path, _TransformSetFile)
    try:
        records = [
            TransformRecord(
                id=entry.id,
                transform=AffineTransform(linear=entry.A, translation=entry.b),
                width=entry.width,
                height=entry.height,
            )
            for entry in parsed.transforms
        ]
    except ValidationError as e:
        raise FileFormatError(f"Invalid transform in {path}: {e}") from e
    _LOGGER.info(f"Read {len(records)} transforms of dimension {parsed.dim} from {path}")
    return TransformSet(dim=parsed.dim, records=records)


def write_transform_set(path: PathLike, transform_set: TransformSet) -> None:
    entries = []
    for record in transform_set.records:
        entry: Dict[str, Any] = {
            "id": record.id,
            "A": record.transform.linear.entries.tolist(),
            "b": record.transform.translation.tolist(),
        }
        if record.width is not None and record.height is not None:
            entry["width"] = record.width
            entry["height"] = record.height
        entries.append(entry)
    _write(
        path,
        {"version": FORMAT_VERSION, "dim": transform_set.dim, "transforms": entries},
    )


def read_correspondences(path: PathLike) -> List[Correspondence]:
    parsed = _parse(path, _CorrespondenceFile)
    try:
        return [
            Correspondence(from_id=entry.from_id, to_id=entry.to_id, pairs=entry.pairs)
            for entry in parsed.correspondences
        ]
    except ValidationError as e:
        raise FileFormatError(f"Invalid correspondences in {path}: {e}") from e


def mdt_result_payload(ids: Sequence[str], result: MdtResult) -> Dict[str, Any]:
    """The content of an MDT result file."""
    return {
        "version": FORMAT_VERSION,
        "dim": result.transform.dim,
        "T": result.transform.entries.tolist(),
        "objective": result.objective,
        "baseline_objectives": [
            {"id": id, "objective": objective}
            for id, objective in zip(ids, result.baseline_objectives)
        ],
        "solver": {
            "iterations": result.solver.iterations,
            "final_gradient_norm": result.solver.final_gradient_norm,
            "objective": result.solver.objective,
        },
    }


def write_mdt_result(path: PathLike, ids: Sequence[str], result: MdtResult) -> None:
    _write(path, mdt_result_payload(ids, result))


def write_report(path: PathLike, report: BaseModel) -> None:
    """Write a report model as JSON, field by field."""
    _write(path, report.model_dump(mode="json"))


def to_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def _write(path: PathLike, payload: Any) -> None:
    Path(path).write_text(to_json(payload), encoding="utf-8")
    _LOGGER.info(f"Wrote {path}")


def _parse(path: PathLike, schema: Type[_Schema]) -> _Schema:
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise FileFormatError(
            f"{path} is not valid JSON: {e.msg}", line=e.lineno, column=e.colno
        ) from e
    try:
        parsed = schema.model_validate(document)
    except ValidationError as e:
        raise FileFormatError(f"{path} doesn't follow the expected format: {e}") from e
    if parsed.version != FORMAT_VERSION:
        raise FileFormatError(
            f"{path} has format version {parsed.version}, only version {FORMAT_VERSION} is supported"
        )
    return parsed
