import json

import numpy as np
import pytest
from pydantic import ValidationError

from mdtkit.cli import CommandConfig, UsageError, main, parse_args
from mdtkit.storage.files import read_transform_set
from mdtkit.storage.images import load_image, save_image

ORTHOGONAL = "tests/data/orthogonal_pair.json"
STRETCHED = "tests/data/stretched_pair.json"
CORRESPONDENCES = "tests/data/correspondences.json"


def write_transforms(path, linear_parts) -> str:
    payload = {
        "version": 1,
        "dim": len(linear_parts[0]),
        "transforms": [
            {"id": f"t{i}", "A": np.asarray(a).tolist(), "b": [0.0] * len(a)}
            for i, a in enumerate(linear_parts)
        ],
    }
    path.write_text(json.dumps(payload))
    return str(path)


def test_parse_args(tmp_path):
    config = parse_args(
        ["report", "--input", STRETCHED, "--reference", "index:1", "--max-iters", "50", "--tol", "1e-10", "--verbose"]
    )
    assert config.subcommand == "report"
    assert config.reference.index == 1
    assert config.verbosity == 1
    solver = config.karcher_config()
    assert (solver.max_iterations, solver.gradient_tolerance) == (50, 1e-10)
    assert parse_args(["mdt", "--input", STRETCHED]).karcher_config().max_iterations == 200

    with pytest.raises(UsageError):
        parse_args(["unknown"])
    with pytest.raises(UsageError):
        parse_args(["mdt", "--input", STRETCHED, "--quiet", "--verbose"])
    with pytest.raises(ValidationError, match="does not exist"):
        parse_args(["mdt", "--input", str(tmp_path / "missing.json")])
    with pytest.raises(ValidationError, match="needs --output"):
        parse_args(["rereference", "--input", STRETCHED])
    with pytest.raises(ValidationError, match="needs --images"):
        parse_args(["compose", "--input", STRETCHED, "--output", str(tmp_path / "out.png")])
    with pytest.raises(ValidationError, match="Invalid reference"):
        parse_args(["report", "--input", STRETCHED, "--reference", "best"])
    with pytest.raises(ValidationError):
        CommandConfig(subcommand="mdt", input=STRETCHED, max_iterations=0)


def test_mdt_command(tmp_path, capsys):
    output = tmp_path / "mdt.json"
    assert main(["mdt", "--input", STRETCHED, "--output", str(output)]) == 0
    result = json.loads(output.read_text())
    np.testing.assert_allclose(result["T"], np.diag([2.0, 1.0]), atol=1e-12)
    assert [entry["id"] for entry in result["baseline_objectives"]] == ["wide.png", "plain.png"]
    assert "MDT objective: 0.960906" in capsys.readouterr().out


def test_report_command(tmp_path, capsys):
    assert main(["report", "--input", ORTHOGONAL, "--reference", "identity"]) == 0
    assert "total (sum of squares): 0.000000" in capsys.readouterr().out

    output = tmp_path / "report.json"
    assert main(["report", "--input", STRETCHED, "--reference", "index:0", "--output", str(output)]) == 0
    report = json.loads(output.read_text())
    assert report["reference"] == "index:0"
    assert report["total"] == pytest.approx(np.log(4) ** 2)


def test_rereference_command(tmp_path):
    output, report = tmp_path / "corrected.json", tmp_path / "report.json"
    code = main(
        ["rereference", "--input", STRETCHED, "--output", str(output), "--report", str(report), "--quiet"]
    )
    assert code == 0
    corrected = read_transform_set(output)
    assert corrected.ids == ["wide.png", "plain.png"]
    assert (corrected.records[0].width, corrected.records[0].height) == (8, 6)
    np.testing.assert_allclose(corrected.transforms[0].linear.entries, np.diag([2.0, 1.0]), atol=1e-12)
    np.testing.assert_allclose(corrected.transforms[1].linear.entries, np.diag([0.5, 1.0]), atol=1e-12)
    np.testing.assert_allclose(corrected.transforms[1].translation, [20.0, 0.0], atol=1e-9)
    assert json.loads(report.read_text())["total_after"] == pytest.approx(2 * np.log(2) ** 2)


def test_compose_command(tmp_path, capsys):
    images = tmp_path / "frames"
    images.mkdir()
    save_image(np.full((6, 8, 3), 100, dtype=np.uint8), images / "wide.png")
    save_image(np.full((6, 8, 3), 200, dtype=np.uint8), images / "plain.png")
    output, corrected = tmp_path / "panorama.png", tmp_path / "corrected.json"
    code = main(
        [
            "compose",
            "--input",
            STRETCHED,
            "--images",
            str(images),
            "--output",
            str(output),
            "--corrected",
            str(corrected),
        ]
    )
    assert code == 0
    canvas = load_image(output)
    # x spans [0, 14] for the first image and [20, 23.5] for the second
    assert canvas.shape == (6, 25, 3)
    assert np.all(canvas[:, :15] == 100)
    assert np.all(canvas[:, 15:20] == 0)
    assert np.all(canvas[:, 20:24] == 200)
    assert read_transform_set(corrected).ids == ["wide.png", "plain.png"]
    assert "total after correction" in capsys.readouterr().out

    output = tmp_path / "as_given.png"
    assert main(["compose", "--input", STRETCHED, "--images", str(images), "--output", str(output), "--reference", "identity"]) == 0
    assert load_image(output).shape == (6, 48, 3)


def test_estimate_command(tmp_path, capsys):
    output = tmp_path / "transforms.json"
    assert main(["estimate", "--input", CORRESPONDENCES, "--output", str(output), "--reference", "index:1"]) == 0
    estimated = read_transform_set(output)
    assert estimated.ids == ["left", "right"]
    np.testing.assert_allclose(estimated.transforms[0].homogeneous(), [[1, 0, -10], [0, 1, 0], [0, 0, 1]], atol=1e-9)
    np.testing.assert_allclose(estimated.transforms[1].homogeneous(), np.eye(3), atol=1e-12)
    assert "rms_residual" in capsys.readouterr().out

    assert main(["estimate", "--input", CORRESPONDENCES, "--output", str(output)]) == 0
    for transform in read_transform_set(output).transforms:
        np.testing.assert_allclose(transform.linear.entries, np.eye(2), atol=1e-9)

    assert main(["estimate", "--input", CORRESPONDENCES, "--output", str(output), "--reference", "index:2"]) == 2


def test_quiet(tmp_path, capsys):
    assert main(["mdt", "--input", STRETCHED, "--quiet"]) == 0
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "INFO" not in captured.err


def test_exit_codes(tmp_path, random_invertible):
    assert main([]) == 1
    assert main(["mdt", "--input", str(tmp_path / "missing.json")]) == 1
    assert main(["mdt", "--input", "tests/data/malformed.json"]) == 1

    singular = write_transforms(tmp_path / "singular.json", [np.eye(2), [[1.0, 2.0], [2.0, 4.0]]])
    assert main(["mdt", "--input", singular]) == 2
    assert main(["report", "--input", STRETCHED, "--reference", "index:5"]) == 2

    hard = write_transforms(tmp_path / "hard.json", [random_invertible(3) for _ in range(5)])
    assert main(["mdt", "--input", hard, "--max-iters", "1", "--tol", "1e-300"]) == 3

    output = tmp_path / "corrected.json"
    assert main(["rereference", "--input", ORTHOGONAL, "--output", str(output)]) == 4
    assert not output.exists()


def test_ill_conditioned_pair_commands(tmp_path):
    # one transform seen from the other has condition number 1e16
    pair = write_transforms(tmp_path / "pair.json", [np.diag([1e4, 1e-4]), np.diag([1e-4, 1e4])])
    assert main(["mdt", "--input", pair, "--quiet"]) == 0
    assert main(["report", "--input", pair, "--reference", "index:0", "--quiet"]) == 0
    output = tmp_path / "corrected.json"
    assert main(["rereference", "--input", pair, "--output", str(output), "--quiet"]) == 0
    assert read_transform_set(output).ids == ["t0", "t1"]


def test_errors_are_logged(capsys):
    assert main(["report", "--input", STRETCHED, "--reference", "index:5"]) == 2
    assert "out of range" in capsys.readouterr().err
