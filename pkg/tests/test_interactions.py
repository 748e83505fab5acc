import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from polybump.interactions import (InteractionQuery, SyntheticProfile, UnderflowError, fit_asymptotics,
                                   pair_integral, predict_pair, predict_theta, sample_pair, theta_integral)
from polybump.radial import ground_state


def brute_pair(u, v, R, dim):
    """Independent quadrature of int u(|x + R e1|) v(|x|) dx."""
    if dim == 1:
        f = lambda x: u(np.array([abs(x + R)]))[0] * v(np.array([abs(x)]))[0]
        return integrate.quad(f, -R - 40, 40, points=[-R, 0.0], limit=400, epsabs=0, epsrel=1e-11)[0]
    # polar (dim 2) or cylindrical-about-e1 (dim 3) coordinates around the origin
    def inner(th, r):
        d = math.sqrt(max(r * r + R * R + 2 * r * R * math.cos(th), 0.0))
        w = r if dim == 2 else 2 * math.pi * r * r * math.sin(th)
        return u(np.array([d]))[0] * v(np.array([r]))[0] * w
    top = 2 * math.pi if dim == 2 else math.pi
    val = 0.0
    for a, b in ((0.0, R), (R, R + 40.0)):
        val += integrate.dblquad(inner, a, b, 0.0, top, epsabs=0, epsrel=1e-10)[0]
    return val


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_pair_against_brute_force(dim):
    U = ground_state(1.0, 1.0, dim)
    for R in (3.0, 7.0):
        assert pair_integral(InteractionQuery(U, U, (R,) + (0.0,) * (dim - 1))) == \
            pytest.approx(brute_pair(U, U, R, dim), rel=1e-7)


def test_pair_synthetic_mixed_rates():
    u, v = SyntheticProfile(0.0, 1.0), SyntheticProfile(-1.0, 1.5)
    q = InteractionQuery(u, v, (5.0, 0.0), dim=2)
    assert pair_integral(q) == pytest.approx(brute_pair(u, v, 5.0, 2), rel=1e-7)


def test_pair_symmetry():
    U = ground_state(1.0, 1.0, 2)
    a = pair_integral(InteractionQuery(U, U, (3.0, 4.0)))
    b = pair_integral(InteractionQuery(U, U, (5.0, 0.0)))
    assert a == pytest.approx(b, rel=1e-12)


def brute_theta(U, s, t, R):
    def inner(th, r):
        d = math.sqrt(r * r + R * R + 2 * r * R * math.cos(th))
        x = np.array([r])
        return U(np.array([d]))[0] ** s * t * U(x)[0] ** (t - 1) * U.derivative(x)[0] * math.cos(th) * r
    return sum(integrate.dblquad(inner, a, b, 0.0, 2 * math.pi, epsabs=0, epsrel=1e-10)[0]
               for a, b in ((0.0, R), (R, R + 40.0)))


@pytest.mark.parametrize("s, t", [(1.0, 1.0), (1.0, 3.0), (2.0, 2.0)])
def test_theta_against_brute_force(s, t):
    U = ground_state(1.0, 1.0, 2)
    got = theta_integral(InteractionQuery(U, U, (4.0, 0.0), "theta", s, t))
    assert got == pytest.approx(brute_theta(U, s, t, 4.0), rel=1e-7)


@given(x=st.floats(0.5, 8.0), y=st.floats(-8.0, 8.0))
@settings(max_examples=10)
def test_theta_odd_in_xi1(x, y):
    U = ground_state(1.0, 1.0, 2)
    a = theta_integral(InteractionQuery(U, U, (x, y), "theta", 1.0, 2.0))
    b = theta_integral(InteractionQuery(U, U, (-x, y), "theta", 1.0, 2.0))
    assert a == pytest.approx(-b, rel=1e-12)
    assert theta_integral(InteractionQuery(U, U, (0.0, y), "theta", 1.0, 2.0)) == 0.0


def test_theta_rejects_small_powers():
    U = ground_state(1.0, 1.0, 2)
    with pytest.raises(ValueError):
        theta_integral(InteractionQuery(U, U, (3.0, 0.0), "theta", 0.5, 1.0))


def test_underflow_reported():
    U = ground_state(1.0, 1.0, 1)
    with pytest.raises(UnderflowError):
        pair_integral(InteractionQuery(U, U, (2000.0,)))


@pytest.mark.parametrize("args, case, power", [
    ((0.0, 1.0, 0.0, 2.0, 2), "A1-i", 0.0),
    ((0.0, 2.0, -1.0, 1.0, 2), "A1-i", -1.0),
    ((0.0, 1.0, -0.5, 1.0, 2), "A1-ii-sum", 0.0 - 0.5 + 1.5),
    ((0.0, 1.0, -1.5, 1.0, 2), "A1-ii-log", 0.0),
    ((0.0, 1.0, -3.0, 1.0, 2), "A1-ii-dominant", 0.0),
    ((-1.0, 1.0, -2.0, 1.0, 3), "A1-ii-log", -1.0),
])
def test_predict_pair(args, case, power):
    p = predict_pair(*args)
    assert p.case == case and p.power == pytest.approx(power)


@pytest.mark.parametrize("s, t, dim, case", [
    (1.0, 2.0, 2, "A2-i"), (1.0, 1.0, 2, "A2-ii-sum"), (3.0, 3.0, 2, "A2-ii-log"),
    (4.0, 4.0, 2, "A2-ii-dominant"), (2.0, 2.0, 3, "A2-ii-log"), (5.0, 5.0, 1, "A2-ii-sum"),
])
def test_predict_theta(s, t, dim, case):
    assert predict_theta(s, t, dim).case == case
    with pytest.raises(ValueError):
        predict_theta(2.0, 1.0, 2)


@given(rate=st.floats(0.5, 3.0), power=st.floats(-2.0, 2.0), c=st.floats(-3.0, 3.0))
def test_fit_recovers_exact_law(rate, power, c):
    R = np.linspace(10.0, 20.0, 8)
    samples = list(zip(R, np.exp(c - rate * R + power * np.log(R))))
    f = fit_asymptotics(samples, predict_pair(power, rate, power, rate + 1.0, 2), correction=False)
    assert f.exp_rate == pytest.approx(rate, rel=1e-9)
    assert f.poly_power == pytest.approx(power, abs=1e-7)


def test_fit_rejects():
    p = predict_pair(0, 1, 0, 2, 2)
    with pytest.raises(ValueError):
        fit_asymptotics([(1.0, 1.0)] * 3, p)
    with pytest.raises(ValueError):
        fit_asymptotics([(float(i), float(i)) for i in range(1, 8)], p)


def test_sample_pair_decreasing():
    U = ground_state(1.0, 1.0, 2)
    vals = [v for _, v in sample_pair(U, U, [4.0, 6.0, 8.0], 2)]
    assert vals[0] > vals[1] > vals[2] > 0
