import logging
from typing import Callable

import numpy as np
import pytest


def random_rotation_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_lower_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Lower triangular with log-uniform diagonal in [e^-2, e^2]."""
    lower = np.tril(rng.standard_normal((dim, dim)), -1)
    return lower + np.diag(np.exp(rng.uniform(-2.0, 2.0, dim)))


def random_invertible_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    """U·diag(σ)·V with log-uniform σ in [e^-2, e^2], so the condition number is at most e^4."""
    sigma = np.exp(rng.uniform(-2.0, 2.0, dim))
    return (
        random_rotation_matrix(rng, dim)
        @ np.diag(sigma)
        @ random_rotation_matrix(rng, dim)
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def random_rotation(rng) -> Callable[[int], np.ndarray]:
    return lambda dim: random_rotation_matrix(rng, dim)


@pytest.fixture
def random_lower(rng) -> Callable[[int], np.ndarray]:
    return lambda dim: random_lower_matrix(rng, dim)


@pytest.fixture
def random_invertible(rng) -> Callable[[int], np.ndarray]:
    return lambda dim: random_invertible_matrix(rng, dim)


@pytest.fixture
def random_spd(rng) -> Callable[[int], np.ndarray]:
    def spd(dim: int) -> np.ndarray:
        a = random_invertible_matrix(rng, dim)
        return a @ a.T

    return spd


@pytest.fixture(autouse=True)
def reset_package_logger():
    """The command line configures the `mdtkit` logger; undo it after every test."""
    logger = logging.getLogger("mdtkit")
    level, handlers = logger.level, list(logger.handlers)
    yield
    logger.setLevel(level)
    logger.handlers = handlers
