import logging

import numpy as np
import pytest
from pydantic import ValidationError

from mdtkit.common import AffineTransform
from mdtkit.exceptions import DegenerateConfigurationError, EmptyInputError
from mdtkit.panorama.estimate import (
    Correspondence,
    estimate_affine,
    register_transforms,
)


def make_pairs(transform: AffineTransform, source: np.ndarray) -> np.ndarray:
    return np.hstack([source, transform.apply(source)])


def test_estimate_affine_exact():
    estimate = estimate_affine([[0, 0, 1, 2], [1, 0, 2, 2], [0, 1, 1, 3]])
    np.testing.assert_allclose(estimate.transform.linear.entries, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(estimate.transform.translation, [1.0, 2.0], atol=1e-12)
    assert estimate.rms_residual == pytest.approx(0.0, abs=1e-12)


def test_estimate_affine_recovers_transform(random_invertible, rng):
    expected = AffineTransform(linear=random_invertible(2), translation=rng.uniform(-20, 20, 2))
    source = rng.uniform(0, 100, (8, 2))
    estimate = estimate_affine(make_pairs(expected, source))
    np.testing.assert_allclose(estimate.transform.homogeneous(), expected.homogeneous(), atol=1e-9)
    assert estimate.rms_residual < 1e-9


def test_estimate_affine_noisy(random_invertible, rng):
    expected = AffineTransform(linear=random_invertible(2), translation=[3.0, -4.0])
    source = rng.uniform(0, 200, (50, 2))
    pairs = make_pairs(expected, source)
    pairs[:, 2:] += rng.normal(0.0, 0.5, (50, 2))
    estimate = estimate_affine(pairs)
    assert 0.2 < estimate.rms_residual < 1.0
    np.testing.assert_allclose(estimate.transform.linear.entries, expected.linear.entries, atol=0.05)


def test_estimate_affine_degenerate():
    with pytest.raises(DegenerateConfigurationError):
        estimate_affine([[0, 0, 0, 0], [1, 1, 2, 2], [2, 2, 4, 4], [3, 3, 6, 6]])
    with pytest.raises(DegenerateConfigurationError):
        estimate_affine([[0, 0, 0, 0], [1, 0, 1, 0]])
    # every target collapses onto one line
    with pytest.raises(DegenerateConfigurationError):
        estimate_affine([[0, 0, 0, 0], [1, 0, 1, 0], [0, 1, 1, 0]])
    with pytest.raises(ValueError):
        estimate_affine([[0, 0, 1]])


def test_correspondence_validation():
    correspondence = Correspondence(from_id="a", to_id="b", pairs=[[0, 0, 1, 1]])
    assert correspondence.pairs.shape == (1, 4)
    with pytest.raises(ValidationError):
        Correspondence(from_id="a", to_id="b", pairs=[[0, 0, 1]])
    with pytest.raises(ValidationError):
        Correspondence(from_id="a", to_id="b", pairs=[[0, 0, 1, float("nan")]])


def test_register_transforms_chain(random_invertible, rng, caplog):
    truth = {
        "left": AffineTransform(linear=random_invertible(2), translation=[-80.0, 5.0]),
        "middle": AffineTransform.identity(2),
        "right": AffineTransform(linear=random_invertible(2), translation=[90.0, -3.0]),
    }
    correspondences = []
    for from_id, to_id in (("left", "middle"), ("right", "middle"), ("left", "right")):
        source = rng.uniform(0, 100, (10, 2))
        # T_from(p) = T_to(q)  =>  q = T_to⁻¹(T_from(p))
        target = truth[to_id].inverse().apply(truth[from_id].apply(source))
        correspondences.append(
            Correspondence(from_id=from_id, to_id=to_id, pairs=np.hstack([source, target]))
        )

    with caplog.at_level(logging.INFO):
        registration = register_transforms(["left", "middle", "right"], correspondences, "middle")
    assert list(registration.transforms) == ["left", "middle", "right"]
    assert registration.reference_id == "middle"
    for id, expected in truth.items():
        np.testing.assert_allclose(
            registration.transforms[id].homogeneous(), expected.homogeneous(), atol=1e-8
        )
    assert registration.rms_residuals == pytest.approx([0.0, 0.0, 0.0], abs=1e-8)
    assert "'left' -> 'middle'" in caplog.text


def test_register_transforms_single_image():
    registration = register_transforms(["only"], [], "only")
    np.testing.assert_array_equal(registration.transforms["only"].homogeneous(), np.eye(3))
    assert registration.rms_residuals == []


def test_register_transforms_invalid(rng):
    pairs = np.hstack([rng.uniform(0, 10, (5, 2)), rng.uniform(0, 10, (5, 2))])
    connected = Correspondence(from_id="a", to_id="b", pairs=pairs)
    with pytest.raises(EmptyInputError):
        register_transforms([], [], "a")
    with pytest.raises(ValueError, match="unique"):
        register_transforms(["a", "a"], [connected], "a")
    with pytest.raises(ValueError, match="not one of the images"):
        register_transforms(["a", "b"], [connected], "z")
    with pytest.raises(ValueError, match="unknown image"):
        register_transforms(
            ["a", "b"], [Correspondence(from_id="a", to_id="x", pairs=pairs)], "a"
        )
    # "c" is not connected to anything
    with pytest.raises(DegenerateConfigurationError):
        register_transforms(["a", "b", "c"], [connected], "a")
    with pytest.raises(DegenerateConfigurationError):
        register_transforms(["a", "b"], [], "a")


def test_estimate_affine_warns_on_large_residual(caplog):
    pairs = [[0, 0, 0, 0], [10, 0, 10, 0], [0, 10, 0, 10], [10, 10, 30, 30]]
    with caplog.at_level(logging.WARNING):
        estimate_affine(pairs)
    assert "large compared to" in caplog.text
