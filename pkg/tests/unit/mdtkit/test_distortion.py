import math

import numpy as np
import pytest

from mdtkit.exceptions import (
    DimensionMismatchError,
    SingularMatrixError,
    UnsupportedDimensionError,
)
from mdtkit.distortion import (
    distortion_breakdown,
    distortion_breakdown_2d,
    fisher_distance,
    fisher_distortion,
    pullback_distance,
    relative_distortion,
)


def test_fisher_distortion_examples(random_rotation):
    assert fisher_distortion(np.eye(3)) == pytest.approx(0.0, abs=1e-15)
    assert fisher_distortion(random_rotation(3)) == pytest.approx(0.0, abs=1e-14)
    assert fisher_distortion(np.diag([1.0, -1.0])) == pytest.approx(0.0, abs=1e-15)
    assert fisher_distortion(np.diag([2.0, 0.5])) == pytest.approx(0.980258, abs=1e-6)
    assert fisher_distortion(np.diag([2.0, 0.5])) == pytest.approx(math.sqrt(2) * math.log(2))


def test_fisher_distortion_invariances(random_invertible, random_rotation):
    for dim in (2, 3):
        for _ in range(50):
            a = random_invertible(dim)
            value = fisher_distortion(a)
            rotated = random_rotation(dim) @ a @ random_rotation(dim)
            assert abs(fisher_distortion(rotated) - value) <= 1e-10
            assert fisher_distortion(np.linalg.inv(a)) == pytest.approx(value, rel=1e-10)


def test_fisher_distance_examples(random_spd):
    assert fisher_distance(np.eye(2), np.diag([math.e**2, 1.0])) == pytest.approx(2.0)
    p = random_spd(3)
    assert fisher_distance(p, p) == pytest.approx(0.0, abs=1e-7)


def test_fisher_distance_properties(random_spd, random_invertible):
    for _ in range(50):
        p, q = random_spd(3), random_spd(3)
        x = random_invertible(3)
        value = fisher_distance(p, q)
        assert fisher_distance(q, p) == pytest.approx(value, rel=1e-9)
        assert fisher_distance(x @ p @ x.T, x @ q @ x.T) == pytest.approx(value, rel=1e-8)


def test_fisher_distance_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        fisher_distance(np.eye(2), np.eye(3))


def test_pullback_distance(random_lower):
    assert pullback_distance(np.eye(2), np.eye(2)) == pytest.approx(0.0, abs=1e-15)
    assert pullback_distance(np.eye(2), np.diag([math.e, math.e])) == pytest.approx(
        2 * math.sqrt(2)
    )
    for _ in range(20):
        l1, l2, l3 = random_lower(3), random_lower(3), random_lower(3)
        value = pullback_distance(l1, l2)
        expected = 2 * fisher_distortion(np.linalg.solve(l1, l2))
        assert abs(value - expected) <= 1e-9 * (1 + value)
        # metric triangle inequality
        assert value <= pullback_distance(l1, l3) + pullback_distance(l3, l2) + 1e-9
    with pytest.raises(DimensionMismatchError):
        pullback_distance(np.eye(2), np.eye(3))


def test_distortion_breakdown_2d():
    c, s = math.cos(0.7), math.sin(0.7)
    rotation = distortion_breakdown_2d([[c, -s], [s, c]])
    assert rotation.total == pytest.approx(0.0, abs=1e-15)
    assert rotation.angular == pytest.approx(0.0, abs=1e-15)
    assert rotation.areal == pytest.approx(0.0, abs=1e-15)

    equal_area = distortion_breakdown_2d(np.diag([2.0, 0.5]))
    assert equal_area.angular == pytest.approx(math.log(4))
    assert equal_area.areal == pytest.approx(0.0, abs=1e-15)

    conformal = distortion_breakdown_2d(np.diag([2.0, 2.0]))
    assert conformal.angular == pytest.approx(0.0, abs=1e-15)
    assert conformal.areal == pytest.approx(math.log(4))


def test_distortion_breakdown_identity(random_invertible):
    for _ in range(100):
        a = random_invertible(2)
        breakdown = distortion_breakdown_2d(a)
        assert breakdown.total == pytest.approx(fisher_distortion(a), rel=1e-12)
        assert breakdown.angular**2 + breakdown.areal**2 == pytest.approx(
            2 * breakdown.total**2, rel=1e-9, abs=1e-12
        )
        assert breakdown.airy_kavrayskiy == pytest.approx(math.sqrt(2) * breakdown.total)


def test_distortion_breakdown_any_dimension():
    breakdown = distortion_breakdown(np.diag([math.e, 1.0, 1.0]))
    assert breakdown.total == pytest.approx(1.0)
    assert breakdown.angular is None and breakdown.areal is None
    assert distortion_breakdown(np.diag([2.0, 2.0])).areal == pytest.approx(math.log(4))
    with pytest.raises(UnsupportedDimensionError):
        distortion_breakdown_2d(np.eye(3))


def test_relative_distortion(random_invertible):
    for _ in range(20):
        reference, a = random_invertible(2), random_invertible(2)
        relative = relative_distortion(reference, a)
        expected = distortion_breakdown_2d(np.linalg.solve(reference, a))
        assert relative.total == pytest.approx(expected.total, rel=1e-9, abs=1e-12)
        assert relative.angular == pytest.approx(expected.angular, rel=1e-9, abs=1e-12)
        assert relative.areal == pytest.approx(expected.areal, rel=1e-9, abs=1e-12)
    assert relative_distortion(np.eye(3), np.diag([math.e, 1.0, 1.0])).total == pytest.approx(1.0)
    with pytest.raises(DimensionMismatchError):
        relative_distortion(np.eye(2), np.eye(3))


def test_relative_distortion_beyond_condition_limit():
    # the quotient diag(1e-8, 1e8) is past the 1e12 limit, the two maps are not
    relative = relative_distortion(np.diag([1e4, 1e-4]), np.diag([1e-4, 1e4]))
    assert relative.angular == pytest.approx(math.log(1e16), rel=1e-12)
    assert relative.areal == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(SingularMatrixError):
        relative_distortion(np.diag([1e7, 1e-7]), np.eye(2))
