import numpy as np
import pytest

from partint.geometry import Formalism, HamiltonianSystem, Kind

PROJECTILE_H = "(p_x^2 + p_y^2)/(2*m) + m*G*y + gamma*z"


@pytest.fixture
def projectile():
    fm = Formalism(Kind.CONTACT, 2, ("x", "y"), ("p_x", "p_y"))
    return HamiltonianSystem.from_text(fm, PROJECTILE_H, {"m": 1.0, "G": 9.8, "gamma": 0.5})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
