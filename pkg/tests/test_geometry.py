import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polybump.acceptance import group_closure
from polybump.geometry import (Rotation, SectorField, SectorGrid, assemble_sum_of_bumps, build_peaks, bump_parts,
                               bumps_at, graded_faces, group_rotation, rotate_field, rotation_matrix,
                               rotation_permutation, sector_grid)
from polybump.radial import ground_state

angles = st.floats(-10, 10, allow_nan=False)
evens = st.sampled_from([2, 4, 6, 8])


@given(a=angles, b=angles)
def test_rotation_composition(a, b):
    Ra, Rb = Rotation(a), Rotation(b)
    np.testing.assert_allclose(Ra.compose(Rb).matrix(), Ra.matrix() @ Rb.matrix(), atol=1e-12)
    np.testing.assert_allclose(Ra.compose(Ra.inverse()).matrix(), np.eye(2), atol=1e-12)


@given(a=angles)
def test_rotation_3d_fixes_axis(a):
    M = Rotation(a, 3).matrix()
    np.testing.assert_allclose(M @ [0, 0, 1.0], [0, 0, 1.0])
    assert np.linalg.det(M) == pytest.approx(1.0)


@given(m=st.integers(1, 5), k=evens)
def test_group_closure(m, k):
    ok, detail = group_closure(m, k)
    assert ok, detail


@given(rho=st.floats(0.01, 1.0), eps=st.floats(0.005, 0.2), k=evens, m=st.integers(1, 4),
       dim=st.sampled_from([2, 3]))
def test_peaks(rho, eps, k, m, dim):
    cfg = build_peaks(rho, eps, k, m, dim)
    allp = cfg.rotated_peaks.reshape(-1, dim)
    np.testing.assert_allclose(np.linalg.norm(allp, axis=1), rho, rtol=1e-12)
    assert cfg.min_sep_scaled == pytest.approx(cfg.brute_force_min_sep(), rel=1e-9)
    # ring i is ring 1 turned back by R_hat_i
    for i in range(1, m + 1):
        R = group_rotation(i, m, k, dim)
        np.testing.assert_allclose(R.apply(cfg.rotated_peaks[i - 1]), cfg.peaks, atol=1e-12)


def test_peaks_reject():
    for args in ((0.0, 0.1, 2), (0.1, 0.1, 3), (0.1, -1.0, 2)):
        with pytest.raises(ValueError):
            build_peaks(*args)
    with pytest.raises(ValueError):
        build_peaks(0.1, 0.1, 2, 1, 1)


@given(n=st.integers(1, 40), k=evens, J=st.lists(st.integers(-500, 500), min_size=1, max_size=20))
def test_fold_index(n, k, J):
    g = SectorGrid(np.linspace(0, 1, 3), n, k)
    J = np.array(J)
    f = g.fold_index(J)
    assert np.all((f >= 0) & (f < n))
    # even about theta = 0 and periodic with period 2 sectors
    np.testing.assert_array_equal(f, g.fold_index(-1 - J))
    np.testing.assert_array_equal(f, g.fold_index(J + 2 * n))


@pytest.mark.parametrize("dim", [2, 3])
def test_integrals(dim):
    f = graded_faces(0.05, 3.0, 12.0)
    g = SectorGrid(f, 24, 4, 1, dim, graded_faces(0.05, 3.0, 12.0) if dim == 3 else None)
    r2 = g.radius() ** 2
    # int exp(-|y|^2) = pi^(dim/2), midpoint rule: O(h^2)
    assert g.integrate(np.exp(-r2)) == pytest.approx(math.pi ** (dim / 2), rel=2e-3)


def test_volume_is_exact():
    g = sector_grid(5.0, 0.1, 16, 2)
    assert g.integrate(np.ones(g.size)) == pytest.approx(math.pi * g.r_out**2, rel=1e-12)


def test_grid_rejects():
    with pytest.raises(ValueError):
        SectorGrid(np.array([0.1, 1.0]))
    with pytest.raises(ValueError):
        SectorGrid(np.array([0.0, 1.0]), 4, 2, 1, 3)


@given(h=st.floats(0.01, 0.5), ru=st.floats(0.5, 5.0), ro=st.floats(5.0, 40.0))
def test_graded_faces(h, ru, ro):
    f = graded_faces(h, ru, ro, 1.05, 1.0)
    assert f[0] == 0 and f[-1] == pytest.approx(ro) and np.all(np.diff(f) > 0)


def test_sum_of_bumps_symmetric():
    """The two-bump field of k = 2 is even under theta -> pi - theta: check via evaluate."""
    U = ground_state(1.0, 1.0, 2)
    cfg = build_peaks(0.3, 0.1, 2)
    g = sector_grid(12.0, 0.1, 32, 2)
    f = assemble_sum_of_bumps(U, cfg, g)
    pts = np.array([[1.3, 0.4], [-1.3, 0.4], [1.3, -0.4], [-1.3, -0.4]]) + [[2.0, 0.0]] * np.array([[1], [-1], [1], [-1]])
    vals = f.evaluate(pts)
    np.testing.assert_allclose(vals, vals[0], rtol=1e-12)
    exact = bumps_at(U, cfg.scaled_peaks(), pts[:1])
    assert vals[0] == pytest.approx(exact[0], rel=1e-3)
    with pytest.raises(ValueError):
        assemble_sum_of_bumps(U, build_peaks(3.0, 0.1, 2), g)


def test_rotation_matrix_matches_field_rotation():
    g = SectorGrid(np.linspace(0, 4, 9), 15, 2, 4)
    x = np.random.default_rng(3).standard_normal(g.size)
    for i in range(1, 5):
        M = rotation_matrix(g, i)
        np.testing.assert_allclose(M @ x, rotate_field(SectorField(g, x), i).values, atol=1e-12)
    assert rotation_permutation(g, 2) is None
    assert rotation_permutation(SectorGrid(np.linspace(0, 4, 9), 16, 2, 4), 2) is not None


def test_bump_gradient():
    U = ground_state(1.0, 1.0, 2)
    pts = np.array([[0.7, -0.2], [2.0, 1.0]])
    c = np.array([[0.1, 0.3]])
    _, grad = bump_parts(U, c, pts, gradient=True)
    h = 1e-6
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (bump_parts(U, c, pts + e) - bump_parts(U, c, pts - e)) / (2 * h)
        np.testing.assert_allclose(grad[..., d], fd, rtol=1e-6, atol=1e-9)


def test_field_rows_and_arith():
    g = sector_grid(2.0, 0.5, 4, 2)
    f = SectorField(g, np.arange(g.size, dtype=float))
    assert len(list(f.rows())) == g.size
    np.testing.assert_array_equal((2 * f - f).values, f.values)
    with pytest.raises(ValueError):
        SectorField(g, np.zeros(3))
