"""Command line front-end.

```
mdtkit mdt --input transforms.json --output mdt.json
mdtkit report --input transforms.json --reference index:0
mdtkit rereference --input transforms.json --output corrected.json --report report.json
mdtkit compose --input transforms.json --images ./frames --output panorama.png
mdtkit estimate --input correspondences.json --output transforms.json
```

Exit codes: 0 on success, 1 on invalid input (unparsable files, bad arguments, missing paths),
2 on singular input or an invalid reference index, 3 when the solver doesn't converge and 4 when
a panorama transform is a reflection.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence

import pandas as pd
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from mdtkit.exceptions import (
    InvalidReferenceError,
    MdtError,
    NoConvergenceError,
    ReflectionNotSupportedError,
    SingularMatrixError,
)
from mdtkit.frechet import KarcherConfig
from mdtkit.mdt import mdt
from mdtkit.panorama.composite import composite
from mdtkit.panorama.correction import (
    CorrectionResult,
    PanoramaInput,
    rereference,
    rereference_fixed,
)
from mdtkit.panorama.estimate import register_transforms
from mdtkit.report import (
    ReferenceChoice,
    build_reference_report,
    format_correction_report,
    format_mdt_result,
    format_reference_report,
    format_table,
)
from mdtkit.storage.files import (
    TransformSet,
    read_correspondences,
    read_transform_set,
    write_mdt_result,
    write_report,
    write_transform_set,
)
from mdtkit.storage.images import panorama_input, save_image

_LOGGER = logging.getLogger(__name__)

_LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s (%(filename)s:%(lineno)s)"
_LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"
_LOG_LEVELS = {-1: logging.WARNING, 0: logging.INFO, 1: logging.DEBUG}

Subcommand = Literal["mdt", "report", "rereference", "compose", "estimate"]


class UsageError(Exception):
    """Invalid command line arguments."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


class CommandConfig(BaseModel):
    """The validated options of one invocation. Every path is checked before any work starts."""

    subcommand: Subcommand
    input: Path
    output: Optional[Path] = None
    images: Optional[Path] = None
    report: Optional[Path] = None
    corrected: Optional[Path] = None
    reference: ReferenceChoice = ReferenceChoice(kind="mdt")
    max_iterations: Optional[int] = Field(default=None, ge=1)
    tolerance: Optional[float] = Field(default=None, gt=0)
    verbosity: Literal[-1, 0, 1] = 0
    """-1 with --quiet, 1 with --verbose."""

    model_config = ConfigDict(frozen=True)

    @field_validator("reference", mode="before")
    @classmethod
    def _parse_reference(cls, value: object) -> object:
        if isinstance(value, str):
            return ReferenceChoice.parse(value)
        return value

    @field_validator("input")
    @classmethod
    def _check_input(cls, path: Path) -> Path:
        if not path.is_file():
            raise ValueError(f"Input file {path} does not exist")
        return path

    @field_validator("images")
    @classmethod
    def _check_images(cls, path: Optional[Path]) -> Optional[Path]:
        if path is not None and not path.is_dir():
            raise ValueError(f"Image directory {path} does not exist")
        return path

    @field_validator("output", "report", "corrected")
    @classmethod
    def _check_parent(cls, path: Optional[Path]) -> Optional[Path]:
        if path is not None and not path.parent.is_dir():
            raise ValueError(f"Directory {path.parent} of output {path} does not exist")
        return path

    @model_validator(mode="after")
    def _check_required(self) -> "CommandConfig":
        if self.subcommand in ("rereference", "compose", "estimate") and self.output is None:
            raise ValueError(f"'{self.subcommand}' needs --output")
        if self.subcommand == "compose" and self.images is None:
            raise ValueError("'compose' needs --images")
        return self

    def karcher_config(self) -> KarcherConfig:
        overrides: Dict[str, object] = {}
        if self.max_iterations is not None:
            overrides["max_iterations"] = self.max_iterations
        if self.tolerance is not None:
            overrides["gradient_tolerance"] = self.tolerance
        return KarcherConfig.model_validate(overrides)


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, help="input file")
    common.add_argument("--output", help="output file")
    common.add_argument(
        "--reference",
        default="mdt",
        help="reference frame: mdt, identity, central or index:<j> (default: mdt)",
    )
    common.add_argument("--max-iters", type=int, dest="max_iterations", help="solver iteration budget")
    common.add_argument("--tol", type=float, dest="tolerance", help="solver gradient tolerance")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="only print warnings and errors")
    verbosity.add_argument("--verbose", action="store_true", help="print debug logs")

    panorama = _ArgumentParser(add_help=False)
    panorama.add_argument("--images", help="directory holding the images, named <id> or <id>.png")
    panorama.add_argument("--report", help="write the distortion report (JSON) to this file")

    parser = _ArgumentParser(
        prog="mdtkit",
        description="Mean Distorting Transformation of affine transform sets and panoramas.",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    subparsers.add_parser(
        "mdt", parents=[common], help="compute the MDT of a transform set"
    )
    subparsers.add_parser(
        "report", parents=[common], help="report distortions under a reference"
    )
    subparsers.add_parser(
        "rereference", parents=[common, panorama], help="re-reference a panorama"
    )
    compose = subparsers.add_parser(
        "compose", parents=[common, panorama], help="re-reference and composite a panorama"
    )
    compose.add_argument("--corrected", help="also write the corrected transforms to this file")
    subparsers.add_parser(
        "estimate",
        parents=[common, panorama],
        help="estimate panorama transforms from point correspondences",
    )
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> CommandConfig:
    """Parse and validate the command line.

    Raises
    ------
    UsageError
        If the arguments don't parse.
    pydantic.ValidationError
        If a value is invalid or a path doesn't exist.
    """
    args = build_parser().parse_args(argv)
    verbosity = 1 if args.verbose else -1 if args.quiet else 0
    _configure_logging(verbosity)
    values = {
        key: value
        for key, value in vars(args).items()
        if value is not None and key not in ("quiet", "verbose")
    }
    return CommandConfig(verbosity=verbosity, **values)


def run_mdt(config: CommandConfig) -> None:
    transform_set = read_transform_set(config.input)
    result = mdt([t.linear for t in transform_set.transforms], config.karcher_config())
    if config.output is not None:
        write_mdt_result(config.output, transform_set.ids, result)
    _print(config, format_mdt_result(transform_set.ids, result))


def run_report(config: CommandConfig) -> None:
    transform_set = read_transform_set(config.input)
    report = build_reference_report(
        transform_set.ids,
        transform_set.transforms,
        config.reference,
        config.karcher_config(),
    )
    if config.output is not None:
        write_report(config.output, report)
    _print(config, format_reference_report(report))


def run_rereference(config: CommandConfig) -> None:
    transform_set = read_transform_set(config.input)
    panorama = panorama_input(transform_set, config.images)
    result = _correct(panorama, config)
    assert config.output is not None
    write_transform_set(config.output, _corrected_set(transform_set, result))
    _write_correction_report(config, result)


def run_compose(config: CommandConfig) -> None:
    transform_set = read_transform_set(config.input)
    panorama = panorama_input(transform_set, config.images)
    result = _correct(panorama, config)
    canvas = composite(panorama, result)
    assert config.output is not None
    save_image(canvas.canvas, config.output)
    if config.corrected is not None:
        write_transform_set(config.corrected, _corrected_set(transform_set, result))
    _write_correction_report(config, result)


def run_estimate(config: CommandConfig) -> None:
    """Register the images of a correspondence file. `index:<j>` picks the image whose plane is kept;
    `mdt` and `central` register against the first image and then re-reference the result."""
    correspondences = read_correspondences(config.input)
    ids: List[str] = []
    for correspondence in correspondences:
        for id in (correspondence.from_id, correspondence.to_id):
            if id not in ids:
                ids.append(id)
    gauge = config.reference.index if config.reference.kind == "index" else 0
    if gauge is None or not 0 <= gauge < len(ids):
        raise InvalidReferenceError(
            f"Reference index {gauge} is out of range for {len(ids)} images"
        )
    registration = register_transforms(ids, correspondences, ids[gauge])
    transform_set = TransformSet.from_transforms(
        ids, [registration.transforms[id] for id in ids]
    )
    if config.reference.kind in ("mdt", "central"):
        panorama = panorama_input(transform_set, config.images)
        transform_set = _corrected_set(transform_set, _correct(panorama, config))
    assert config.output is not None
    write_transform_set(config.output, transform_set)
    rows = [
        {"from_id": c.from_id, "to_id": c.to_id, "pairs": len(c.pairs), "rms_residual": rms}
        for c, rms in zip(correspondences, registration.rms_residuals)
    ]
    table = pd.DataFrame(rows, columns=["from_id", "to_id", "pairs", "rms_residual"])
    _print(config, format_table(table))


_COMMANDS: Dict[str, Callable[[CommandConfig], None]] = {
    "mdt": run_mdt,
    "report": run_report,
    "rereference": run_rereference,
    "compose": run_compose,
    "estimate": run_estimate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code."""
    try:
        config = parse_args(argv)
    except (UsageError, ValidationError) as e:
        sys.stderr.write(f"mdtkit: error: {e}\n")
        return 1
    try:
        _COMMANDS[config.subcommand](config)
    except NoConvergenceError as e:
        _LOGGER.error(str(e))
        return 3
    except ReflectionNotSupportedError as e:
        _LOGGER.error(str(e))
        return 4
    except (SingularMatrixError, InvalidReferenceError) as e:
        _LOGGER.error(str(e))
        return 2
    except (MdtError, ValueError, OSError) as e:
        _LOGGER.error(str(e))
        return 1
    return 0


def run() -> None:
    sys.exit(main())


def _correct(panorama: PanoramaInput, config: CommandConfig) -> CorrectionResult:
    if config.reference.kind == "mdt":
        return rereference(panorama, config.karcher_config())
    return rereference_fixed(panorama, config.reference.resolve_index(panorama.transforms))


def _corrected_set(transform_set: TransformSet, result: CorrectionResult) -> TransformSet:
    return TransformSet.from_transforms(
        transform_set.ids, result.corrected_transforms, template=transform_set
    )


def _write_correction_report(config: CommandConfig, result: CorrectionResult) -> None:
    if config.report is not None:
        write_report(config.report, result.report)
    _print(config, format_correction_report(result.report))


def _print(config: CommandConfig, text: str) -> None:
    if config.verbosity >= 0:
        print(text)


def _configure_logging(verbosity: int) -> None:
    """Send the package logs to stderr. Repeated calls replace the handler installed by the previous one."""
    logger = logging.getLogger("mdtkit")
    for handler in list(logger.handlers):
        if getattr(handler, "_mdtkit_cli", False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_LOG_FORMAT, datefmt=_LOG_DATE_FORMAT))
    handler._mdtkit_cli = True  # type: ignore[attr-defined]
    logger.addHandler(handler)
    logger.setLevel(_LOG_LEVELS[verbosity])
