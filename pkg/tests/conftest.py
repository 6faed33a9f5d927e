"""Shared fixtures for the rodstab tests."""

import numpy as np
import pytest

from rodstab.coefficients import CrossSection, MaterialParams, build_coefficients, default_coefficients
from rodstab.so3 import exp_skew

# Figure-1 strip: default materials, w_z = 0.6, chi = 6, L = 1
STRIP_WZ = 0.6
STRIP_CHI = 6.0


@pytest.fixture
def strip_coeffs():
    return default_coefficients(STRIP_WZ, STRIP_CHI)


@pytest.fixture
def square_coeffs():
    """mu = 1, lambda = 0, unit square: c12 = c13 = 1/6."""
    return build_coefficients(MaterialParams(0.0, 1.0, False), CrossSection(0.5), 2.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_rotation(rng):
    """Rotation with angle below 3 (away from the log branch cut)."""
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    return exp_skew(axis * rng.uniform(0.0, 3.0))
