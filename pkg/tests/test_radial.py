import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson

from polybump.params import sphere_area
from polybump.radial import fit_decay, ground_state, reference_profile, rescale, solve_ground_state


def test_sech_closed_form():
    U = solve_ground_state(1.0, 1.0, 1)
    r = np.linspace(0.0, 25.0, 2501)
    np.testing.assert_allclose(U(r), math.sqrt(2) / np.cosh(r), atol=1e-8)
    np.testing.assert_allclose(U.derivative(r), -math.sqrt(2) * np.tanh(r) / np.cosh(r), atol=1e-8)


@pytest.mark.parametrize("dim, u0", [(2, 2.20620086465), (3, 4.33738768)])
def test_central_values(dim, u0):
    # classical values of the positive radial solution of -Delta Q + Q = Q^3
    assert reference_profile(dim).u0 == pytest.approx(u0, rel=1e-5)


@settings(max_examples=6)
@given(lam=st.floats(0.5, 4.0), mu=st.floats(0.5, 3.0), dim=st.sampled_from([1, 2, 3]))
def test_scaling_law_matches_direct_solve(lam, mu, dim):
    direct = solve_ground_state(lam, mu, dim)
    r = np.linspace(0.0, 15.0 / math.sqrt(lam), 801)
    np.testing.assert_allclose(rescale(reference_profile(dim), lam, mu)(r), direct(r), atol=1e-8)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_shape(dim):
    U = ground_state(1.0, 1.0, dim)
    r = np.linspace(0.0, 30.0, 3001)
    u = U(r)
    assert np.all(u > 0) and np.all(np.diff(u) < 0)
    assert U.ode_residual() < 1e-6
    assert U.energy_identity_defect() < 1e-8


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_pohozaev(dim):
    # (N-2)/2 int|U'|^2 + N/2 int U^2 = N/4 int U^4, independent of the energy identity
    U = ground_state(1.0, 1.0, dim)
    r = np.linspace(0.0, 40.0, 40001)
    w = sphere_area(dim) * r ** (dim - 1)
    kin = simpson(w * U.derivative(r) ** 2, x=r)
    l2 = simpson(w * U(r) ** 2, x=r)
    l4 = simpson(w * U(r) ** 4, x=r)
    assert (dim - 2) / 2 * kin + dim / 2 * l2 == pytest.approx(dim / 4 * l4, rel=1e-7)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("omega", [1.0, 4.0])
def test_decay_law(dim, omega):
    U = ground_state(omega, 1.0, dim)
    s = math.sqrt(omega)
    f = fit_decay(U, (10 / s, 20 / s))
    assert f.rate == pytest.approx(s, rel=0.02)
    assert f.power == pytest.approx((dim - 1) / 2, abs=0.05)


def test_tail_continuity():
    U = ground_state(1.0, 1.0, 2)
    r = U.r_max
    assert U(np.array([r * (1 - 1e-9)]))[0] == pytest.approx(U(np.array([r * (1 + 1e-9)]))[0], rel=1e-6)


def test_rescale_rejects():
    with pytest.raises(ValueError):
        rescale(ground_state(2.0, 1.0, 2), 1.0, 1.0)
    with pytest.raises(ValueError):
        rescale(reference_profile(2), -1.0, 1.0)
    with pytest.raises(ValueError):
        fit_decay(reference_profile(2), (5.0, 1.0))


def test_export(tmp_path):
    c, j = ground_state(1.0, 1.0, 1).export(tmp_path / "gs")
    assert c.read_bytes().startswith(b"r,U\r\n") and j.exists()
