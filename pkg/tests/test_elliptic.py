import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from polybump import elliptic as el
from polybump.geometry import SectorField, SectorGrid, build_peaks, graded_faces, sector_grid

from conftest import small_ansatz


def _grid(h, dim=2, r_out=12.0, n_theta=16, k=2):
    f = graded_faces(h, r_out, r_out)
    return SectorGrid(f, n_theta, k, 1, dim, f if dim == 3 else None)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_stiffness_symmetric_and_conservative(dim):
    g = _grid(0.25, dim, 6.0, 6)
    K = el.stiffness(g)
    assert abs(K - K.T).max() == 0
    np.testing.assert_allclose(K @ np.ones(g.size), 0.0, atol=1e-12)  # pure Neumann
    x = np.random.default_rng(0).standard_normal(g.size)
    assert x @ (el.stiffness(g, 1.0) @ x) > 0


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_laplacian_second_order(dim):
    """-Delta exp(-r^2) = (2N - 4 r^2) exp(-r^2); errors drop by ~4 when h halves."""
    errs = []
    for h in (0.2, 0.1, 0.05):
        g = _grid(h, dim, 8.0, 16 if dim > 1 else 1)
        pts = g.points
        r2 = np.sum(pts**2, axis=1)
        exact = (2 * dim - 4 * r2) * np.exp(-r2)
        sel = r2 < 9.0
        errs.append(np.max(np.abs(el.minus_laplacian(g, np.exp(-r2))[sel] - exact[sel])))
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.8 < r < 2.3 for r in rates), (errs, rates)


def test_minus_laplacian_longdouble():
    g = _grid(0.2, 2, 4.0, 8)
    x = np.exp(-g.radius() ** 2)
    lo = el.minus_laplacian(g, x.astype(np.longdouble))
    assert lo.dtype == np.longdouble
    np.testing.assert_allclose(np.asarray(lo, dtype=float), el.minus_laplacian(g, x), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_value_at_origin(dim):
    g = _grid(0.05, dim, 2.0, 8 if dim > 1 else 1)
    f = SectorField(g, 3.0 - 2.0 * g.radius() ** 2)
    assert el.value_at_origin(f) == pytest.approx(3.0, abs=1e-12)


def test_kernel_residual_second_order(case):
    res = []
    for h, n in ((0.1, 64), (0.05, 128)):  # the coarser pair is pre-asymptotic
        peaks = build_peaks(0.5, 0.1, 2)
        g = SectorGrid(graded_faces(h, 20.0, 20.0), n, 2)
        res.append(el.build_kernel(case.U, peaks, g).residual)
    assert 3.0 < res[0] / res[1] < 5.0


def test_corrections_properties(ansatz):
    a = ansatz
    assert a.extras["phi_residual"] < 1e-10 and a.extras["psi_residual"] < 1e-10
    assert a.extras["z_component"] < 1e-10
    assert abs(a.grid.integrate(a.psi * a.kernel.z.values)) < 1e-10 * math.sqrt(
        a.grid.integrate(a.psi**2) * a.kernel.norm_sq)


def test_phi_independent_of_beta(case):
    a = small_ansatz(case)
    b = small_ansatz(type(case)(case.params.with_(beta=-0.1), case.V, case.W, case.shadow, case.U,
                                case.constants, case.B1))
    np.testing.assert_allclose(a.phi, b.phi, rtol=1e-12)
    np.testing.assert_allclose(b.psi, a.psi * (-0.1 / -0.25), rtol=1e-9, atol=1e-14)


def test_psi_equation_holds_up_to_Z(ansatz):
    a = ansatz
    op = el.second_component_operator(a.U, a.peaks, a.grid)
    f = 2 * a.beta * a.phi0 * a.shadow.Y.u0 * a.S
    r = op.apply(a.psi) - f + a.deflation * a.kernel.z.values
    assert np.max(np.abs(r)) < 1e-9 * np.max(np.abs(f))


def test_nondegeneracy(case):
    rep = el.check_nondegeneracy(case.shadow)
    assert rep.passed and rep.lowest[0] < 0
    # shifting V by minus an even eigenvalue manufactures an even zero mode
    bad = el.check_nondegeneracy(case.shadow, shift=-rep.lowest[1])
    assert not bad.passed


def _simple_op(g, c=1.0, free=True):
    A = (el.stiffness(g, 1.0) + sp.diags(g.volumes * c)).tocsc()
    return el.LinearOperatorSpec("second_component", g, A, 1.0, None, A if free else None)


def test_coercivity_graph_norm_of_itself_is_one():
    g = sector_grid(8.0, 0.2, 8, 2)
    assert el.estimate_coercivity(_simple_op(g), None, norm="graph") == pytest.approx(1.0, rel=1e-6)


@settings(max_examples=3)
@given(c=st.floats(0.5, 3.0))
def test_coercivity_l2_matches_eigenvalue(c):
    g = sector_grid(8.0, 0.2, 8, 2)
    op = _simple_op(g, c)
    lam = el.lowest_eigenvalues(op, 1, sigma=0.0)[0]
    assert el.estimate_coercivity(op, None, norm="l2") == pytest.approx(lam, rel=1e-6)


def test_linearised_operator_singular_value_matches_spectrum(ansatz):
    """Without the constraint, min |eigenvalue| of the symmetric operator is its smallest singular value."""
    a = ansatz
    op = el.second_component_operator(a.U, a.peaks, a.grid)
    lam = el.lowest_eigenvalues(op, 4, sigma=0.0)
    c = el.estimate_coercivity(op, None, norm="l2")
    assert c == pytest.approx(min(abs(x) for x in lam), rel=1e-5)


def test_operators_symmetric(ansatz):
    a = ansatz
    assert el.first_component_operator(a.shadow.Y, a.grid, a.eps).is_symmetric()
    assert el.second_component_operator(a.U, a.peaks, a.grid).is_symmetric()


def test_bordered_matrix():
    A = sp.identity(3, format="csc")
    B = el.bordered_matrix(A, [1.0, 2.0, 3.0]).toarray()
    assert B.shape == (4, 4) and B[3, 3] == 0 and list(B[3, :3]) == [1.0, 2.0, 3.0]


def test_unknown_operator_kind():
    with pytest.raises(ValueError):
        el.LinearOperatorSpec("other", sector_grid(1.0, 0.5, 2, 2), sp.identity(4, format="csc"))
