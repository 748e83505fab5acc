"""Linear elliptic solves on symmetry-reduced sector grids.

-Delta is discretised by finite volumes as W^{-1} K, where W holds the cell
volumes and K is symmetric: no flux through the symmetry lines and the origin,
and a Robin condition -du/dn = kappa u on the outer boundary that matches the
exponential tail. Operators are stored in "volume form" K + W diag(c), which
is symmetric for the uncoupled kinds.

Fields of the construction live on the scaled grid z = y / eps. Equations of
the first component are written there multiplied by eps^2, so that
-Delta_y + V becomes -Delta_z + eps^2 V.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .geometry import (PeakConfiguration, SectorField, SectorGrid, bump_parts, graded_faces,
                       rotation_matrix)


class SingularOperatorError(RuntimeError):
    """A solve met a (near) kernel it cannot handle; carries the nearby spectrum."""

    def __init__(self, message, spectrum=()):
        super().__init__(message)
        self.spectrum = tuple(spectrum)


class StagnationError(RuntimeError):
    pass


# --- discretisation -------------------------------------------------------------

def _face_couplings(grid: SectorGrid):
    """(a, b, c) arrays: cells a and b share a face with coupling coefficient c."""
    f, r = grid.r_faces, grid.r
    dr = np.diff(f)
    if grid.dim == 1:
        idx = np.arange(grid.nr)
        return idx[:-1], idx[1:], 1.0 / np.diff(r)
    nt, dth = grid.n_theta, grid.dtheta
    nz = grid.nz
    dz = np.diff(grid.z_faces) if grid.dim == 3 else np.ones(1)
    idx = np.arange(grid.size).reshape(nz, grid.nr, nt)
    A, B, C = [], [], []
    # radial faces: area r_{i+1/2} dtheta dz over the centre distance
    cr = f[1:-1] * dth / np.diff(r)
    A.append(idx[:, :-1, :]), B.append(idx[:, 1:, :])
    C.append(np.broadcast_to(dz[:, None, None] * cr[None, :, None], idx[:, :-1, :].shape))
    # angular faces: area dr dz over the arc r dtheta
    if nt > 1:
        ct = dr / (r * dth)
        A.append(idx[:, :, :-1]), B.append(idx[:, :, 1:])
        C.append(np.broadcast_to(dz[:, None, None] * ct[None, :, None], idx[:, :, :-1].shape))
    if grid.dim == 3 and nz > 1:
        ring = 0.5 * (f[1:] ** 2 - f[:-1] ** 2) * dth
        cz = 1.0 / np.diff(grid.z)
        A.append(idx[:-1]), B.append(idx[1:])
        C.append(np.broadcast_to(cz[:, None, None] * ring[None, :, None], idx[:-1].shape))
    return (np.concatenate([a.ravel() for a in A]), np.concatenate([b.ravel() for b in B]),
            np.concatenate([c.ravel() for c in C]))


def robin_diagonal(grid: SectorGrid, kappa: float) -> np.ndarray:
    """Diagonal contribution of -du/dn = kappa u on the outer faces."""
    out = np.zeros(grid.size)
    if kappa == 0:
        return out
    f = grid.r_faces
    dr_last = f[-1] - f[-2]
    g = kappa / (1.0 + 0.5 * kappa * dr_last)
    if grid.dim == 1:
        out[-1] = g
        return out
    dth = grid.dtheta
    dz = np.diff(grid.z_faces) if grid.dim == 3 else np.ones(1)
    idx = np.arange(grid.size).reshape(grid.nz, grid.nr, grid.n_theta)
    out[idx[:, -1, :].ravel()] += np.repeat(dz * f[-1] * dth * g, grid.n_theta)
    if grid.dim == 3:
        zf = grid.z_faces
        gz = kappa / (1.0 + 0.5 * kappa * (zf[-1] - zf[-2]))
        ring = 0.5 * (f[1:] ** 2 - f[:-1] ** 2) * dth
        out[idx[-1].ravel()] += np.repeat(ring * gz, grid.n_theta)
    return out


def stiffness(grid: SectorGrid, kappa: float = 0.0) -> sp.csr_matrix:
    """Symmetric K with -Delta u ~ W^{-1} K u."""
    cache = grid.__dict__.setdefault("_cached", {})
    key = ("K0",)
    if key not in cache:
        a, b, c = _face_couplings(grid)
        n = grid.size
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([a, b, b, a])
        vals = np.concatenate([c, c, -c, -c])
        cache[key] = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    K0 = cache[key]
    if kappa == 0:
        return K0
    return (K0 + sp.diags(robin_diagonal(grid, kappa))).tocsr()


def minus_laplacian(grid: SectorGrid, values, kappa: float = 0.0) -> np.ndarray:
    """Nodal -Delta_h of ``values`` (any float dtype)."""
    K = stiffness(grid, kappa)
    v = np.asarray(values)
    if v.dtype == np.longdouble:
        K = K.astype(np.longdouble)
    return (K @ v) / grid.volumes


def value_at_origin(f: SectorField) -> float:
    """Extrapolate cell values to the origin assuming f = a + b r^2 (+ c z^2)."""
    g, a = f.grid, f.array()
    r0, r1 = g.r[0], g.r[1]

    def extrap(f0, f1, x0, x1):
        return (x1**2 * f0 - x0**2 * f1) / (x1**2 - x0**2)

    if g.dim == 1:
        return float(extrap(a[0], a[1], r0, r1))
    if g.dim == 2:
        return float(extrap(a[0].mean(), a[1].mean(), r0, r1))
    z0, z1 = g.z[0], g.z[1]
    lay = [extrap(a[l, 0].mean(), a[l, 1].mean(), r0, r1) for l in (0, 1)]
    return float(extrap(lay[0], lay[1], z0, z1))


# --- operators -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearOperatorSpec:
    """A discretised linear operator in volume form.

    ``matrix`` @ x equals W (L x) for the pointwise operator L; for
    ``full_coupled`` the unknown is (phi, psi) stacked and the first block row
    carries the eps^2 factor of the scaled first equation.
    """

    kind: str  # first_component | second_component | full_coupled
    grid: SectorGrid
    matrix: sp.csc_matrix
    scale: float = 1.0  # eps: grid coordinate z relates to y by y = eps z
    potential: np.ndarray | None = None
    free: sp.csc_matrix | None = None  # -Delta + far potential, for graph norms
    fields: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("first_component", "second_component", "full_coupled"):
            raise ValueError(f"unknown operator kind {self.kind!r}")

    @property
    def weights(self) -> np.ndarray:
        w = self.grid.volumes
        return np.concatenate([w, w]) if self.kind == "full_coupled" else w

    def apply(self, x) -> np.ndarray:
        return (self.matrix @ np.asarray(x)) / self.weights

    def lu(self):
        d = self.__dict__
        if "_lu" not in d:
            d["_lu"] = splu(self.matrix.tocsc())
        return d["_lu"]

    def solve(self, rhs) -> np.ndarray:
        return self.lu().solve(self.weights * np.asarray(rhs, dtype=float))

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        A = self.matrix
        return sp.linalg.norm(A - A.T) <= tol * sp.linalg.norm(A)


def first_component_operator(Y, grid: SectorGrid, scale: float = 1.0,
                             shift: float = 0.0) -> LinearOperatorSpec:
    """eps^2 (-Delta_y + V - 3 mu1 Y^2) written on z = y / eps (``scale`` = eps).

    ``Y`` is the radial profile of the first component; its potential and mu
    define the operator. ``shift`` adds a constant to V.
    """
    s = scale
    rho = s * grid.radius()
    Yv = Y(rho)
    pot = Y.potential_at(rho) + shift - 3 * Y.mu * Yv**2
    r_far = s * grid.r_out
    kappa = s * math.sqrt(max(float(Y.potential_at(np.array([r_far]))[0]) + shift, 1e-300))
    W = grid.volumes
    A = (stiffness(grid, kappa) + sp.diags(W * s**2 * pot)).tocsc()
    free = (stiffness(grid, kappa) + sp.diags(W * s**2 * (Y.potential_at(rho) + shift))).tocsc()
    return LinearOperatorSpec("first_component", grid, A, s, s**2 * pot, free, {"Y": Yv})


def second_component_operator(U, peaks: PeakConfiguration, grid: SectorGrid) -> LinearOperatorSpec:
    """-Delta + omega0 - 3 mu2 sum_j U_j^2 on the scaled grid."""
    parts = bump_parts(U, peaks.scaled_peaks(1), grid.points)
    pot = U.omega - 3 * U.mu * np.sum(parts**2, axis=0)
    W = grid.volumes
    K = stiffness(grid, math.sqrt(U.omega))
    A = (K + sp.diags(W * pot)).tocsc()
    free = (K + sp.diags(W * U.omega)).tocsc()
    return LinearOperatorSpec("second_component", grid, A, peaks.epsilon, pot, free, {"parts": parts})


def coupled_operator(params, V, W, grid: SectorGrid, eps: float, u, v,
                     defect_kappas: tuple[float, float] | None = None) -> LinearOperatorSpec:
    """Linearisation of the scaled system at (u, v): the operator L = (L1, L2).

    Block rows are the eps^2-scaled first equation and the second equation.
    ``V`` and ``W`` are callables of the unscaled radius.
    """
    p = params
    n = grid.size
    rho = eps * grid.radius()
    vol = grid.volumes
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    R = [rotation_matrix(grid, i) for i in range(1, p.m + 1)]
    vi = [Ri @ v for Ri in R]
    ku, kv = defect_kappas or far_kappas(V, W, grid, eps)
    Ku, Kv = stiffness(grid, ku), stiffness(grid, kv)
    Vn, Wn = V(rho), W(rho)
    d_uu = eps**2 * (Vn - 3 * p.mu1 * u**2 - p.beta * sum(x**2 for x in vi))
    A_uu = Ku + sp.diags(vol * d_uu)
    A_uv = -sp.diags(vol * 2 * eps**2 * p.beta * u) @ sum(sp.diags(x) @ Ri for x, Ri in zip(vi, R))
    A_vu = -sp.diags(vol * 2 * p.beta * v * u)
    others = list(zip(vi[1:], R[1:]))
    d_vv = Wn - 3 * p.mu2 * v**2 - p.beta * u**2 - p.alpha * sum((x**2 for x, _ in others), np.zeros(n))
    A_vv = Kv + sp.diags(vol * d_vv)
    if others and p.alpha != 0:
        A_vv = A_vv - sp.diags(vol * 2 * p.alpha * v) @ sum(sp.diags(x) @ Ri for x, Ri in others)
    A = sp.bmat([[A_uu, A_uv], [A_vu, A_vv]], format="csc")
    free = sp.block_diag([Ku + sp.diags(vol * eps**2 * Vn), Kv + sp.diags(vol * Wn)], format="csc")
    return LinearOperatorSpec("full_coupled", grid, A, eps, None, free, {"u": u, "v": v})


def far_kappas(V, W, grid: SectorGrid, eps: float) -> tuple[float, float]:
    """Robin rates of the two components at the outer radius (scaled units)."""
    r_far = np.array([eps * grid.r_out])
    return eps * math.sqrt(float(V(r_far)[0])), math.sqrt(float(W(r_far)[0]))


# --- kernel -----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelBasis:
    z: SectorField
    z_parts: np.ndarray  # (k, size): Z_{eps, j}
    norm_sq: float
    residual: float  # sup of -Delta_h Z + omega0 Z - 3 mu2 sum U_j^2 Z_j


def build_kernel(profile, peaks: PeakConfiguration, grid: SectorGrid) -> KernelBasis:
    """Z_eps = eps d/d rho of sum_j U(y - P_j / eps), assembled from U'."""
    centres = peaks.scaled_peaks(1)
    vals, grads = bump_parts(profile, centres, grid.points, gradient=True)
    e = np.zeros((len(centres), grid.points.shape[1]))
    e[:, :2] = np.column_stack([np.cos(peaks.angles), np.sin(peaks.angles)])
    parts = -np.einsum("jnd,jd->jn", grads, e)
    z = parts.sum(axis=0)
    res = minus_laplacian(grid, z, math.sqrt(profile.omega)) + profile.omega * z \
        - 3 * profile.mu * np.sum(vals**2 * parts, axis=0)
    return KernelBasis(SectorField(grid, z), parts, grid.integrate(z * z), float(np.max(np.abs(res))))


# --- correction terms -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrectionSolve:
    field: SectorField
    at_origin: float
    residual: float
    deflation: float = 0.0  # lambda in -Delta psi + ... = f - lambda Z
    z_component: float = 0.0  # |int psi Z| / (|psi| |Z|)
    spectrum: tuple[float, ...] = ()

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.field.values)))


@dataclass(frozen=True, eq=False)
class CorrectionPair:
    phi: SectorField
    psi: SectorField
    sup_norms: tuple[float, float]
    phi_at_origin: float
    gamma_fit: float
    condition_report: dict


def phi_rhs(Y, peaks: PeakConfiguration, U, grid: SectorGrid) -> np.ndarray:
    """eps^2 Y(eps z) sum_i U_rho^2(R_i z) on the scaled grid."""
    eps = peaks.epsilon
    Yv = Y(eps * grid.radius())
    tot = np.zeros(grid.size)
    for i in range(1, peaks.m + 1):
        tot += bump_parts(U, peaks.scaled_peaks(i), grid.points).sum(axis=0) ** 2
    return eps**2 * Yv * tot


def solve_phi(shadow, U, peaks: PeakConfiguration, grid: SectorGrid, op: LinearOperatorSpec | None = None,
              rhs: np.ndarray | None = None, tol: float = 1e-10) -> CorrectionSolve:
    """-Delta Phi + (V - 3 mu1 Y^2) Phi = Y sum_i U_rho^2(R_i y / eps), solved on z = y / eps.

    No coupling constant enters: the solution does not depend on beta.
    """
    if op is None:
        op = first_component_operator(shadow.Y, grid, peaks.epsilon)
    f = phi_rhs(shadow.Y, peaks, U, grid) if rhs is None else np.asarray(rhs, dtype=float)
    x = op.solve(f)
    res = _relative_residual(op, x, f)
    if not res < tol:
        raise SingularOperatorError(f"Phi solve residual {res:.2e} exceeds {tol:.1e}")
    fld = SectorField(grid, x)
    return CorrectionSolve(fld, value_at_origin(fld), res)


def _relative_residual(op, x, f, extra=None) -> float:
    # pointwise residual against the size of the terms it balances
    r = op.apply(x) - f
    if extra is not None:
        r = r + extra
    return float(np.max(np.abs(r)) / _term_scale(op, x, f))


def _term_scale(op, x, f) -> float:
    terms = (abs(op.matrix) @ np.abs(x)) / op.weights
    return max(float(np.max(np.abs(f))), float(np.max(terms)), 1e-300)


def bordered_matrix(A, c) -> sp.csc_matrix:
    """[[A, c], [c^T, 0]] for a single constraint vector c."""
    c = sp.csc_matrix(np.asarray(c, dtype=float).reshape(-1, 1))
    return sp.bmat([[A, c], [c.T, None]], format="csc")


def solve_psi(shadow, U, peaks: PeakConfiguration, grid: SectorGrid, phi_at_origin: float,
              kernel: KernelBasis, beta: float | None = None, op: LinearOperatorSpec | None = None,
              tol: float = 1e-10, spectrum: bool = False, spectrum_tol: float = 1e-6) -> CorrectionSolve:
    """-Delta Psi + (omega0 - 3 mu2 sum U_j^2) Psi = 2 beta Phi(0) Y(0) sum U_j, Z deflated.

    The solution is sought with int Psi Z = 0 and the equation is imposed up
    to a multiple of Z; the multiplier is returned as ``deflation``.
    """
    if beta is None:
        beta = shadow.beta
    if op is None:
        op = second_component_operator(U, peaks, grid)
    S = op.fields["parts"].sum(axis=0)
    f = 2 * beta * phi_at_origin * shadow.Y.u0 * S
    vol = grid.volumes
    z = kernel.z.values
    B = bordered_matrix(op.matrix, vol * z)
    sol = splu(B).solve(np.concatenate([vol * f, [0.0]]))
    x, lam = sol[:-1], float(sol[-1])
    res = _relative_residual(op, x, f, lam * z)
    if not res < tol:
        raise SingularOperatorError(f"Psi solve residual {res:.2e} exceeds {tol:.1e}")
    nx = math.sqrt(grid.integrate(x * x))
    zc = abs(grid.integrate(x * z)) / (nx * math.sqrt(kernel.norm_sq)) if nx > 0 else 0.0
    spec = ()
    if spectrum:
        spec = lowest_eigenvalues(op, 2, sigma=0.0)
        if abs(spec[1]) < spectrum_tol:
            raise SingularOperatorError("a second near-zero mode survives the deflation", spec)
    fld = SectorField(grid, x)
    return CorrectionSolve(fld, value_at_origin(fld), res, lam, zc, spec)


def fit_gamma(psi: SectorField, peaks: PeakConfiguration, start: float = 3.0, length: float = 10.0):
    """Exponential decay rate of |Psi| along the ray through a peak, outside it.

    Returns (gamma, (r_lo, r_hi)) from a log-linear least-squares fit in the
    distance to the peak.
    """
    g = psi.grid
    col = psi.array()[..., 0] if g.dim == 2 else psi.array()[0, :, 0]
    rr = g.r
    d = rr - peaks.t
    sel = (d >= start) & (d <= start + length)
    y = np.abs(col[sel])
    if sel.sum() < 5 or np.any(y <= 0) or np.any(np.diff(np.sign(col[sel])) != 0):
        raise ValueError("Psi changes sign or vanishes on the fit window")
    A = np.column_stack([np.ones(sel.sum()), -d[sel]])
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return float(coef[1]), (float(d[sel][0]), float(d[sel][-1]))


def tail_bound_constant(psi: SectorField, peaks: PeakConfiguration, gamma: float,
                        r0: float = 0.0, floor: float = 1e-12) -> float:
    """sup |Psi| / (eps^{N/2} sum_j e^{-gamma |y - P_j/eps|}) over |y| >= r0.

    Only nodes where the envelope exceeds ``floor`` relative to its maximum
    are used; further out Psi sits at the round-off level of the solve.
    """
    g = psi.grid
    pts = g.points
    env = np.zeros(g.size)
    for c in peaks.scaled_peaks(1):
        cc = np.zeros(pts.shape[1])
        cc[:2] = c[:2]
        env += np.exp(-gamma * np.linalg.norm(pts - cc, axis=1))
    env *= peaks.epsilon ** (g.dim / 2)
    sel = (g.radius() >= r0) & (env > floor * env.max())
    return float(np.max(np.abs(psi.values[sel]) / env[sel]))


def solve_corrections(shadow, U, peaks: PeakConfiguration, grid: SectorGrid, beta: float | None = None,
                      kernel: KernelBasis | None = None, tol: float = 1e-10) -> CorrectionPair:
    if kernel is None:
        kernel = build_kernel(U, peaks, grid)
    phi = solve_phi(shadow, U, peaks, grid, tol=tol)
    psi = solve_psi(shadow, U, peaks, grid, phi.at_origin, kernel, beta=beta, tol=tol)
    try:
        gamma, _ = fit_gamma(psi.field, peaks)
    except ValueError:
        gamma = float("nan")
    return CorrectionPair(phi.field, psi.field, (phi.sup_norm, psi.sup_norm), phi.at_origin, gamma,
                          {"deflation": psi.deflation, "z_component": psi.z_component,
                           "phi_residual": phi.residual, "psi_residual": psi.residual})


# --- spectra ----------------------------------------------------------------------

def lowest_eigenvalues(op: LinearOperatorSpec, n: int, sigma: float) -> tuple[float, ...]:
    """The n eigenvalues of the symmetric operator nearest ``sigma`` (shift-invert)."""
    M = sp.diags(op.weights).tocsc()
    vals = eigsh(op.matrix.tocsc(), k=n, M=M, sigma=sigma, which="LM", return_eigenvectors=False)
    return tuple(float(x) for x in np.sort(vals))


@dataclass(frozen=True)
class SpectrumReport:
    lowest: tuple[float, ...]
    nearest_zero: tuple[float, ...]
    tol: float
    passed: bool
    grid: str

    def rows(self):
        return [("lowest", i, x) for i, x in enumerate(self.lowest)] + \
            [("nearest_zero", i, x) for i, x in enumerate(self.nearest_zero)]


def nondegeneracy_grid(dim: int, h: float = 0.02, r_out: float = 30.0, n_theta: int = 16) -> SectorGrid:
    """Grid in unscaled units for the first-component spectrum (even in every variable)."""
    faces = graded_faces(h, 8.0, r_out, growth=1.05)
    if dim == 1:
        return SectorGrid(faces, 1, 2, 1, 1)
    if dim == 2:
        return SectorGrid(faces, n_theta, 2, 1, 2)
    return SectorGrid(faces, n_theta, 2, 1, 3, graded_faces(h, 8.0, r_out, growth=1.05))


def check_nondegeneracy(shadow, grid: SectorGrid | None = None, n: int = 4, tol: float = 1e-2,
                        shift: float = 0.0) -> SpectrumReport:
    """Eigenvalues of -Delta + V - 3 mu1 Y^2 on even functions; pass iff none is within tol of 0.

    ``shift`` is added to V, which lets a test manufacture an even zero mode.
    """
    Y = shadow.Y
    if grid is None:
        grid = nondegeneracy_grid(Y.dim)
    op = first_component_operator(Y, grid, 1.0, shift=shift)
    lo = float(np.min(op.potential)) - 1.0
    lowest = lowest_eigenvalues(op, n, sigma=lo)
    near = lowest_eigenvalues(op, n, sigma=-0.0137)
    ok = all(abs(x) > tol for x in near)
    desc = f"dim={grid.dim} nr={grid.nr} n_theta={grid.n_theta} h={grid.r_faces[1]:.3g}"
    return SpectrumReport(lowest, near, tol, ok, desc)


# --- coercivity ---------------------------------------------------------------------

def estimate_coercivity(op: LinearOperatorSpec, kernel: KernelBasis | None, norm: str = "graph",
                        block: str | None = None, tol: float = 1e-8, max_iter: int = 2000) -> float:
    """Smallest singular value of Pi_perp L on {int psi Z = 0}.

    The target carries the L^2 norm (unscaled measure for the first
    component); the domain carries either the same L^2 norm or the graph norm
    of the free operators (-Delta + V, -Delta + W), which is equivalent to the
    H^2 norms of the construction. The inverse of the constrained operator is
    applied through a bordered LU factorisation and its largest singular value
    is found by Lanczos iteration on T^{-T} T^{-1} (inverse iteration).
    """
    g = op.grid
    n = g.size
    eps, N = op.scale, g.dim
    w = g.volumes
    A, free = op.matrix, op.free
    if op.kind == "full_coupled":
        if block == "u":
            A, free = A[:n, :n], free[:n, :n]
        elif block == "v":
            A, free = A[n:, n:], free[n:, n:]
    kind = {"u": "u", "v": "v"}.get(block, "uv" if op.kind == "full_coupled" else
                                   ("u" if op.kind == "first_component" else "v"))
    # pointwise operator is S W^{-1} A: S undoes the eps^2 factor of the first equation
    s_u = 1.0 / eps**2 if op.kind in ("full_coupled", "first_component") else 1.0
    parts = {"u": [(s_u, eps**N)], "v": [(1.0, 1.0)], "uv": [(s_u, eps**N), (1.0, 1.0)]}[kind]
    S = np.concatenate([np.full(n, a) for a, _ in parts])
    meas = np.concatenate([b * w for _, b in parts])
    Wd = np.tile(w, len(parts))
    use_constraint = kind in ("v", "uv") and kernel is not None
    if use_constraint:
        zfull = np.zeros(len(S))
        zfull[-n:] = kernel.z.values
        c = Wd * zfull / S  # column of the bordered system
        B = bordered_matrix(A, c)
        zhat = np.sqrt(meas) * zfull
        zhat /= np.linalg.norm(zhat)
    else:
        B = A.tocsc()
        zhat = None
    lu = splu(B.tocsc())
    m = len(S)
    sq = np.sqrt(meas)
    G = (sp.diags(S / Wd) @ free).tocsr() if norm == "graph" else None

    def proj(x):
        return x - zhat * (zhat @ x) if zhat is not None else x

    def pad(x):
        return np.concatenate([x, [0.0]]) if use_constraint else x

    def tinv(b):
        return lu.solve(pad(Wd * b / S))[:m]

    def tinv_t(x):
        return Wd / S * lu.solve(pad(x), trans="T")[:m]

    def D(x):
        return sq * (G @ x if G is not None else x)

    def D_t(y):
        y = sq * y
        return G.T @ y if G is not None else y

    def fwd(bh):
        return D(tinv(proj(bh) / sq))

    def adj(yh):
        return proj(tinv_t(D_t(yh)) / sq)

    Op = LinearOperator((m, m), matvec=lambda x: adj(fwd(x)), dtype=float)
    v0 = proj(np.random.default_rng(0).standard_normal(m))
    try:
        lam = eigsh(Op, k=1, which="LA", v0=v0, tol=tol, maxiter=max_iter, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise StagnationError("coercivity iteration did not converge") from exc
    return float(1.0 / math.sqrt(lam[0]))
