import math
import os

import pytest
from hypothesis import HealthCheck, settings

from polybump import acceptance as ac
from polybump.ansatz import build_ansatz, default_grid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def case():
    """Construction case: N=2, k=2, m=1, beta=-1/4, V=W=1."""
    return ac.construction_case()


def small_ansatz(case, eps=0.1, n_theta=16, rho=None, corrections=True):
    p = case.params.with_(epsilon=eps)
    if rho is None:
        rho = case.d_star * eps * abs(math.log(eps))
    g = default_grid(p, case.shadow.omega0, rho / eps, h=0.1, n_theta=n_theta)
    return build_ansatz(p, case.shadow, case.V, case.W, rho, g, U=case.U, corrections=corrections)


@pytest.fixture(scope="session")
def ansatz(case):
    return small_ansatz(case)
