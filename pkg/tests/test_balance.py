import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polybump.balance import (BalanceError, BalanceProblem, bisect_balance, dominance_holds, solve_balance,
                              sweep_d)

cases = st.sampled_from([("alpha_zero", 2, 1, 2), ("alpha_zero", 4, 1, 2), ("alpha_zero", 2, 1, 3),
                         ("alpha_nonzero", 2, 4, 2), ("alpha_nonzero", 4, 3, 2), ("alpha_nonzero", 2, 4, 3)])


@given(c=cases, log_eps=st.floats(-40.0, -3.0), omega0=st.floats(0.5, 4.0),
       pre=st.tuples(st.floats(0.01, 100.0), st.floats(0.01, 100.0)))
def test_newton_matches_bisection(c, log_eps, omega0, pre):
    case, k, m, dim = c
    p = BalanceProblem(case, omega0, k, m, dim, pre, math.exp(log_eps))
    try:
        sol = solve_balance(p)
    except BalanceError:
        return  # no admissible root for this prefactor pair; bisection agrees below
    assert sol.t == pytest.approx(bisect_balance(p), rel=1e-10)
    assert abs(p.g(sol.t)) < 1e-10
    assert sol.rho == pytest.approx(p.epsilon * sol.t)


def test_unit_case_closed_form():
    # alpha = 0, N = 2, k = 2, omega0 = 1: g(t) = 2 ln eps + ln t + 2 t + ln(t)/2
    p = BalanceProblem("alpha_zero", 1.0, 2, 1, 2, (1.0, 1.0), 1e-3)
    t = solve_balance(p).t
    assert 2 * math.log(1e-3) + 1.5 * math.log(t) + 2 * t == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("case, k, m, dim, d", [
    ("alpha_zero", 2, 1, 2, 1.0), ("alpha_zero", 4, 1, 2, math.sqrt(2)),
    ("alpha_nonzero", 2, 4, 2, 1 / (2 * math.sin(math.pi / 8))),
])
def test_d_limit(case, k, m, dim, d):
    assert BalanceProblem(case, 1.0, k, m, dim).d_limit == pytest.approx(d)
    assert BalanceProblem(case, 4.0, k, m, dim).d_limit == pytest.approx(d / 2)


@pytest.mark.parametrize("case, k, m, dim", [("alpha_zero", 2, 1, 2), ("alpha_nonzero", 4, 3, 2),
                                             ("alpha_nonzero", 2, 4, 3)])
def test_sweep_converges_monotonically(case, k, m, dim):
    tpl = BalanceProblem(case, 1.0, k, m, dim)
    sw = sweep_d(tpl, [10.0**-e for e in (2, 4, 8, 16, 32, 64)])
    assert sw.monotone
    assert abs(sw.d_eff[-1] / sw.d_limit - 1) < 0.05
    assert sw.best_model in ("inv_log", "loglog_over_log")


def test_dg_is_derivative():
    p = BalanceProblem("alpha_nonzero", 1.3, 2, 4, 3, (2.0, 0.5), 1e-5)
    for t in (3.0, 10.0, 30.0):
        h = 1e-6 * t
        assert p.dg(t) == pytest.approx((p.g(t + h) - p.g(t - h)) / (2 * h), rel=1e-6)


def test_prefactor_shift_is_order_one_over_log():
    tpl = BalanceProblem("alpha_zero", 1.0, 2)
    eps = np.array([1e-3, 1e-6, 1e-12])
    a = sweep_d(tpl, eps).d_eff
    b = sweep_d(replace(tpl, prefactors=(10.0, 1.0)), eps).d_eff
    assert np.all(np.abs(a - b) * np.abs(np.log(eps)) <= 1.1 * math.log(10) / tpl.rate)


def test_rejects():
    with pytest.raises(ValueError):
        BalanceProblem("other", 1.0, 2)
    with pytest.raises(ValueError):
        BalanceProblem("alpha_zero", -1.0, 2)
    with pytest.raises(ValueError):
        BalanceProblem("alpha_nonzero", 1.0, 2, 4, 1)
    with pytest.raises(BalanceError):
        solve_balance(BalanceProblem("alpha_zero", 1.0, 2, epsilon=0.5))
    with pytest.raises(ValueError):
        sweep_d(BalanceProblem("alpha_zero", 1.0, 2), [1e-3, 1e-2])


@pytest.mark.parametrize("k, m, ok", [(2, 4, True), (4, 3, True), (2, 2, False), (2, 3, False), (6, 2, False)])
def test_dominance(k, m, ok):
    assert dominance_holds(k, m) is ok
