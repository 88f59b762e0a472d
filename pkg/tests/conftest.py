import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ellipsoid_rh.geometry import EllipsoidGeometry, ThetaGrid  # noqa: E402
from ellipsoid_rh.spectral import solve_modes  # noqa: E402
from ellipsoid_rh.waves import solve_f, solve_g, solve_traveling  # noqa: E402

# frozen reference values from tests/oracles.py (Chebyshev collocation in x = sin)
LAM21_B09 = 6.555987985398073
C_G_B09 = 0.5175717788535202
G_B09_AT_M07 = 0.3010524370314196
F_NORM_SQ_B09 = 0.18484800284064085
F_B09_SOUTH = 0.22141776967889193


@pytest.fixture(scope="session")
def sphere():
    return EllipsoidGeometry(1.0, 1.0)


@pytest.fixture(scope="session")
def oblate():
    return EllipsoidGeometry(0.9, 1.0)


@pytest.fixture(scope="session")
def grid128():
    return ThetaGrid(128)


@pytest.fixture(scope="session")
def mode21(oblate, grid128):
    return solve_modes(oblate, 1, 2, grid128)[-1]


@pytest.fixture(scope="session")
def g21(oblate, grid128, mode21):
    return solve_g(mode21.lam, oblate, grid128)


@pytest.fixture(scope="session")
def f21(oblate, grid128, mode21):
    return solve_f(mode21.lam, oblate, grid128)


@pytest.fixture(scope="session")
def tw21(oblate, grid128):
    return solve_traveling(oblate, 2, 1, 0.3, grid128)


@pytest.fixture(scope="session")
def sphere_tw(sphere, grid128):
    return solve_traveling(sphere, 2, 1, 0.3, grid128)


def sup(a):
    return float(np.max(np.abs(a)))


HALF_PI = 0.5 * math.pi


from hypothesis import settings as _settings  # noqa: E402

_settings.register_profile("repo", deadline=None, max_examples=40)
_settings.load_profile("repo")
