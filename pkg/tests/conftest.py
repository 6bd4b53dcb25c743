import math

import numpy as np
import pytest

from isd.simulate import ROT30


def sigma_2d(s1, s2):
    """Closed-form 2x2 covariance with eigenvalues (s1, s2) in the basis
    rotated clockwise by 30 degrees."""
    return 0.25 * np.array(
        [
            [3 * s1 + s2, math.sqrt(3.0) * (s2 - s1)],
            [math.sqrt(3.0) * (s2 - s1), s1 + 3 * s2],
        ]
    )


def gamma_2d(t, n):
    """Closed-form drifting coefficient of the two-dimensional model."""
    return np.array(
        [
            1.5 * math.sqrt(3.0) + 1.0 - math.sqrt(3.0) * t / n,
            t / n - 1.5 + math.sqrt(3.0),
        ]
    )


BETA_INV_2D = np.array([1.0, math.sqrt(3.0)])


@pytest.fixture(scope="session")
def rot30():
    return ROT30
