from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from polybump import reduction as rd
from polybump.acceptance import Case
from polybump.elliptic import KernelBasis
from polybump.geometry import SectorField
from polybump.params import PotentialSpec
from polybump.radial import ground_state
from polybump.shadow import compute_shadow

from conftest import small_ansatz

TOWNES_MASS = 11.70089652  # int Q^2 for -Delta Q + Q = Q^3 in R^2


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 20)), elements=st.floats(0, 10)))
def test_cross_identities(parts):
    sq, cu = rd._cross(parts)
    S = parts.sum(axis=0)
    scale = 1.0 + S**3
    np.testing.assert_allclose(sq, S**2 - np.sum(parts**2, axis=0), atol=1e-12 * np.max(scale))
    np.testing.assert_allclose(cu, S**3 - np.sum(parts**3, axis=0), atol=1e-12 * np.max(scale))


def test_cross_single_part_is_zero():
    sq, cu = rd._cross(np.array([[1.0, 2.0, 3.0]]))
    assert not sq.any() and not cu.any()


@pytest.mark.parametrize("k", [2, 4])
def test_constants(k):
    U = ground_state(2.21683, 1.0, 2)
    c = rd.eval_constants(U, k)
    # b~ by two routes: the r^N U U' integral and (k/2) int U^2 after integrating by parts
    assert c.b_tilde == pytest.approx(c.b_tilde_identity, rel=1e-10)
    # in 2D int U^2 is independent of omega: b~ = (k/2) * Townes mass
    assert c.b_tilde == pytest.approx(k / 2 * TOWNES_MASS, rel=1e-6)
    assert c.A == pytest.approx(c.b_tilde / 2)


def test_ledger_identity(ansatz):
    er = rd.eval_error_terms(ansatz)
    assert max(er.ledger_defect) < 1e-12
    assert er.e1_l2 > 0 and er.e2_l2 > 0
    names = [n for n, _ in er.rows()]
    assert "E1" in names and "M1" in names


def test_ledger_identity_other_geometry(case):
    p = case.params.with_(k=4, epsilon=0.05)
    sh = case.shadow
    U = case.U
    c4 = Case(p, case.V, case.W, sh, U, case.constants, case.B1)
    er = rd.eval_error_terms(small_ansatz(c4, eps=0.05, n_theta=12, rho=0.2))
    assert max(er.ledger_defect) < 1e-12


def test_corrections_needed(case):
    with pytest.raises(ValueError):
        rd.eval_error_terms(small_ansatz(case, corrections=False))


def test_beta_zero(case):
    p = case.params.with_(beta=0.0)
    V = W = PotentialSpec()
    sh = compute_shadow(p, V, W)
    U = ground_state(sh.omega0, 1.0, 2)
    a = small_ansatz(Case(p, V, W, sh, U, case.constants, case.B1), rho=0.3)
    assert not a.psi.any() and a.deflation == 0.0
    for v in rd.e1_terms(a).values():
        assert not np.any(v)
    t = rd.e2_terms(a)
    _, cu = rd._cross(a.parts)
    np.testing.assert_array_equal(sum(t.values()), cu)
    er = rd.eval_error_terms(a)
    assert er.e1_l2 == 0.0 and max(er.ledger_defect) < 1e-12


def test_f_integrands_regroup_e2(ansatz):
    np.testing.assert_allclose(sum(rd.f_integrands(ansatz).values()), sum(rd.e2_terms(ansatz).values()),
                               rtol=0, atol=1e-15)


def test_projection_odd_in_Z(ansatz):
    a = ansatz
    k = a.kernel
    flipped = replace(a, kernel=KernelBasis(SectorField(a.grid, -k.z.values), -k.z_parts, k.norm_sq, k.residual))
    f0 = rd.eval_projection(a).f_terms
    f1 = rd.eval_projection(flipped).f_terms
    for name in rd.F_NAMES:
        assert f1[name] == -f0[name]


def test_projection_f1(ansatz, case):
    pr = rd.eval_projection(ansatz, case.constants)
    assert pr.f1_limit == pytest.approx(-case.shadow.lap_omega0 * case.constants.A)
    assert pr.f1_ratio > 0 and abs(pr.f1_ratio / pr.f1_limit - 1) < 0.25
    assert pr.f_terms["F3"] < 0
    assert pr.f_terms["F9"] == 0.0  # m = 1
    assert set(pr.dominance_ratios()) == set(rd.F_NAMES)


def test_remainder_projection_zero_at_zero(ansatz):
    z = np.zeros(ansatz.grid.size)
    pr = rd.eval_projection(ansatz, remainder=(z, z))
    assert pr.n_projection == 0.0 and pr.l2_projection == 0.0
    assert all(v == 0.0 for v in pr.p_terms.values())
    assert pr.c_epsilon == pytest.approx(rd.eval_projection(ansatz).c_epsilon, rel=1e-14)


def test_l2_projection_is_linear(ansatz):
    rng = np.random.default_rng(2)
    n = ansatz.grid.size
    x, y = (rng.standard_normal(n) * np.exp(-ansatz.grid.radius() / 5) for _ in range(2))
    a = rd.l2_projection(ansatz, x, y)
    b = rd.l2_projection(ansatz, 2 * x, 2 * y)
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_f3_rate(case):
    U = case.U
    fit = rd.fit_B1(U, 2, [2.5, 3.0, 3.5, 4.0, 4.5, 5.0])
    assert fit.sign < 0
    assert fit.rate_deviation < 0.03


def test_f9_vanishes_with_alpha(case):
    assert rd.f9_value(case.U, 2, 4, 0.0, 3.0, rd.interaction_grid(3.0, 2, case.shadow.omega0, 4, 0.2, 16)) == 0.0


def test_fit_prefactor_exact():
    t = np.linspace(2, 5, 6)
    samples = list(zip(t, -3.0 * np.exp(-1.7 * t) * t**-0.5))
    f = rd.fit_prefactor("B", samples, 1.7, 0.5)
    assert f.prefactor == pytest.approx(3.0, rel=1e-12) and f.rate == pytest.approx(1.7, rel=1e-10)
    assert f.sign == -1 and f.residual < 1e-12
    with pytest.raises(ValueError):
        rd.fit_prefactor("B", [(1.0, 1.0), (2.0, -1.0)], 1.0, 0.0)


@given(p=st.floats(0.5, 4.0), q=st.floats(-2.0, 2.0), c=st.floats(-3.0, 3.0))
def test_exponent_fit_exact(p, q, c):
    eps = np.geomspace(0.1, 0.01, 5)
    vals = np.exp(c) * eps**p * np.abs(np.log(eps)) ** q
    got, fit = rd.exponent_fit(eps, vals, q)
    assert got == pytest.approx(p, rel=1e-9)


def test_reduced_prediction(case):
    pred = case.predicted(0.02)
    assert pred.case == "alpha_zero" and pred.rho == pytest.approx(0.02 * pred.t)
    assert pred.d_limit == pytest.approx(case.d_star)


def test_sign_condition_refused(case):
    bad = replace(case.shadow, lap_omega0=abs(case.shadow.lap_omega0))
    with pytest.raises(rd.HypothesisError):
        rd.solve_reduced_d(case.params, bad, case.constants, case.B1.prefactor)


def test_m_terms_nonnegative(ansatz):
    m = rd.m_terms(ansatz)
    assert len(m) == 10 and all(v >= 0 for v in m.values())
    assert m["M6"] == 0.0  # alpha = 0
