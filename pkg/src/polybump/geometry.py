"""Rotations, polygonal peak sets and symmetry-reduced polar sector grids.

Fields live on the fundamental sector 0 <= theta <= pi/k of the dihedral
group generated by x2 -> -x2 and the rotation by 2 pi/k (k even, so the
group also contains x1 -> -x1). Nodes are cell centred in r and theta, so
both reflection lines and all rotations by multiples of the angular step map
nodes onto nodes. In 3D the grid is cylindrical with z >= 0 and an even
reflection at z = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator


@dataclass(frozen=True)
class Rotation:
    """(x1, x2) -> (x1 cos t + x2 sin t, -x1 sin t + x2 cos t); identity elsewhere."""

    theta: float
    dim: int = 2

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        M = np.eye(self.dim)
        M[:2, :2] = [[c, s], [-s, c]]
        return M

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.matrix().T

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(self.theta + other.theta, self.dim)

    def inverse(self) -> "Rotation":
        return Rotation(-self.theta, self.dim)


def group_rotation(i: int, m: int, k: int, dim: int = 2) -> Rotation:
    """R_hat_i = R_{2 pi (i-1)/(m k)}, i = 1..m."""
    return Rotation(2 * math.pi * (i - 1) / (m * k), dim)


@dataclass(frozen=True, eq=False)
class PeakConfiguration:
    rho: float
    epsilon: float
    k: int
    m: int
    dim: int
    peaks: np.ndarray  # (k, dim), unscaled
    rotated_peaks: np.ndarray  # (m, k, dim); rotated_peaks[0] == peaks
    min_sep_scaled: float

    @property
    def t(self) -> float:
        """Scaled peak radius rho / epsilon."""
        return self.rho / self.epsilon

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.k) / self.k

    def scaled_peaks(self, copy: int = 1) -> np.ndarray:
        return self.rotated_peaks[copy - 1] / self.epsilon

    def brute_force_min_sep(self) -> float:
        pts = self.rotated_peaks.reshape(-1, self.dim) / self.epsilon
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        return float(np.min(d[np.triu_indices(len(pts), 1)]))


def build_peaks(rho: float, epsilon: float, k: int, m: int = 1, dim: int = 2) -> PeakConfiguration:
    if not (rho > 0 and epsilon > 0):
        raise ValueError("rho and epsilon must be positive")
    if k < 2 or k % 2:
        raise ValueError("k must be even")
    if dim not in (2, 3):
        raise ValueError("peak configurations need dim 2 or 3")
    ang = 2 * np.pi * np.arange(k) / k
    peaks = np.zeros((k, dim))
    peaks[:, 0] = rho * np.cos(ang)
    peaks[:, 1] = rho * np.sin(ang)
    rotated = np.stack([group_rotation(i, m, k, dim).inverse().apply(peaks) for i in range(1, m + 1)])
    s = math.pi / k if m == 1 else math.pi / (m * k)
    return PeakConfiguration(rho, epsilon, k, m, dim, peaks, rotated, 2 * rho / epsilon * math.sin(s))


# --- grids --------------------------------------------------------------------

def graded_faces(h: float, r_uniform: float, r_out: float, growth: float = 1.04,
                 h_max: float | None = None) -> np.ndarray:
    """Radial cell faces: spacing h up to r_uniform, then geometric growth."""
    if r_out <= 0 or h <= 0:
        raise ValueError("need positive h and r_out")
    n_u = max(1, int(round(min(r_uniform, r_out) / h)))
    faces = list(np.arange(n_u + 1) * h)
    dr = h
    while faces[-1] < r_out - 1e-12:
        dr = dr * growth if h_max is None else min(dr * growth, h_max)
        faces.append(min(faces[-1] + dr, r_out) if r_out - faces[-1] > 1.5 * dr else r_out)
    return np.asarray(faces)


@dataclass(frozen=True, eq=False)
class SectorGrid:
    """Cell-centred sector grid. dim 1: [0, R] with even reflection at 0."""

    r_faces: np.ndarray
    n_theta: int = 1
    k: int = 2
    m: int = 1
    dim: int = 2
    z_faces: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.r_faces, dtype=float)
        if f[0] != 0.0 or np.any(np.diff(f) <= 0):
            raise ValueError("r_faces must start at 0 and increase")
        if self.dim == 3 and self.z_faces is None:
            raise ValueError("3D grids need z_faces")
        if self.dim == 1:
            object.__setattr__(self, "n_theta", 1)
        object.__setattr__(self, "r_faces", f)

    # geometry
    @property
    def r(self) -> np.ndarray:
        return 0.5 * (self.r_faces[1:] + self.r_faces[:-1])

    @property
    def nr(self) -> int:
        return len(self.r_faces) - 1

    @property
    def nz(self) -> int:
        return 1 if self.z_faces is None else len(self.z_faces) - 1

    @property
    def z(self) -> np.ndarray:
        return 0.5 * (self.z_faces[1:] + self.z_faces[:-1])

    @property
    def sector_angle(self) -> float:
        return math.pi / self.k

    @property
    def dtheta(self) -> float:
        return self.sector_angle / self.n_theta

    @property
    def theta(self) -> np.ndarray:
        return (np.arange(self.n_theta) + 0.5) * self.dtheta

    @property
    def r_out(self) -> float:
        return float(self.r_faces[-1])

    @property
    def shape(self) -> tuple[int, ...]:
        if self.dim == 1:
            return (self.nr,)
        if self.dim == 2:
            return (self.nr, self.n_theta)
        return (self.nz, self.nr, self.n_theta)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def group_order(self) -> int:
        """Number of sector copies that tile the whole space."""
        return {1: 2, 2: 2 * self.k, 3: 4 * self.k}[self.dim]

    def _cache(self, name, fn):
        d = self.__dict__.setdefault("_cached", {})
        if name not in d:
            d[name] = fn()
        return d[name]

    @property
    def points(self) -> np.ndarray:
        """Cartesian node coordinates, shape (size, dim)."""
        def make():
            if self.dim == 1:
                return self.r[:, None]
            R, T = np.meshgrid(self.r, self.theta, indexing="ij")
            xy = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
            if self.dim == 2:
                return xy
            Z = np.repeat(self.z, R.size)
            return np.column_stack([np.tile(xy, (self.nz, 1)), Z])
        return self._cache("points", make)

    @property
    def volumes(self) -> np.ndarray:
        """Cell measures (flattened), for integrals over the sector."""
        def make():
            f = self.r_faces
            if self.dim == 1:
                return np.diff(f)
            ring = 0.5 * (f[1:] ** 2 - f[:-1] ** 2) * self.dtheta
            v = np.repeat(ring, self.n_theta)
            if self.dim == 2:
                return v
            return np.concatenate([v * dz for dz in np.diff(self.z_faces)])
        return self._cache("volumes", make)

    def integrate(self, values) -> float:
        """Integral over the whole space of a group-invariant field."""
        return float(self.group_order * np.dot(self.volumes, np.ravel(values)))

    def radius(self) -> np.ndarray:
        """|y| at every node."""
        return np.linalg.norm(self.points, axis=1)

    def angle_shift(self, i: int) -> float:
        """R_hat_i angle measured in units of the angular step."""
        return 2 * math.pi * (i - 1) / (self.m * self.k) / self.dtheta

    def fold_index(self, J: np.ndarray) -> np.ndarray:
        """Map full-circle angular cell indices to sector indices."""
        P = 2 * self.n_theta
        q = np.mod(J, P)
        return np.where(q < self.n_theta, q, P - 1 - q)


def construction_grid(t: float, epsilon: float, k: int, m: int = 1, dim: int = 2, omega0: float = 1.0,
                      h: float = 0.05, n_theta: int = 64, u_extent: float = 25.0,
                      v_margin: float | None = None, growth: float = 1.05, hx_max: float = 0.1) -> SectorGrid:
    """Grid in scaled coordinates z = y / eps shared by both components.

    Spacing h is kept uniform out to t + v_margin, where the concentrating
    component has decayed to round-off, then grows geometrically (capped at
    hx_max in unscaled units) out to u_extent / eps for the smooth component.
    """
    if v_margin is None:
        v_margin = 30.0 / math.sqrt(omega0)
    r_out = max(u_extent / epsilon, t + v_margin + 10 * h)
    h_max = max(hx_max / epsilon, h)
    faces = graded_faces(h, t + v_margin, r_out, growth, h_max)
    z_faces = graded_faces(h, v_margin, r_out, growth, h_max) if dim == 3 else None
    return SectorGrid(faces, n_theta, k, m, dim, z_faces)


def sector_grid(r_out: float, h: float, n_theta: int, k: int, m: int = 1,
                r_uniform: float | None = None, growth: float = 1.04,
                h_max: float | None = None) -> SectorGrid:
    faces = graded_faces(h, r_out if r_uniform is None else r_uniform, r_out, growth, h_max)
    return SectorGrid(faces, n_theta, k, m, 2)


@dataclass(frozen=True, eq=False)
class SectorField:
    grid: SectorGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != self.grid.size:
            raise ValueError("values do not match the grid")
        object.__setattr__(self, "values", v)

    def array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def extend(self) -> tuple[np.ndarray, np.ndarray]:
        """Values on the full circle of angular cells: (theta_full, array[..., 2k n_theta])."""
        g = self.grid
        if g.dim == 1:
            raise ValueError("nothing to extend in 1D")
        J = np.arange(2 * g.k * g.n_theta)
        return (J + 0.5) * g.dtheta, self.array()[..., g.fold_index(J)]

    def _interpolator(self):
        d = self.__dict__
        if "_interp" in d:
            return d["_interp"]
        g, a = self.grid, self.array()
        pad = 3
        if g.dim == 1:
            r = np.concatenate([-g.r[::-1], g.r])
            vals = np.concatenate([a[::-1], a])
            it = RegularGridInterpolator((r,), vals, method="cubic", bounds_error=False, fill_value=0.0)
        else:
            J = np.arange(-pad, g.n_theta + pad)
            th = (J + 0.5) * g.dtheta
            a = a[..., g.fold_index(J)]
            # even in r through the origin: (−r, theta) is the image of (r, theta) under rotation by pi
            r = np.concatenate([-g.r[:pad][::-1], g.r])
            a = np.concatenate([a[..., :pad, :][..., ::-1, :], a], axis=-2)
            if g.dim == 2:
                axes, vals = (r, th), a
            else:
                z = np.concatenate([-g.z[:pad][::-1], g.z])
                vals = np.concatenate([a[:pad][::-1], a], axis=0)
                axes = (z, r, th)
            it = RegularGridInterpolator(axes, vals, method="cubic", bounds_error=False, fill_value=0.0)
        d["_interp"] = it
        return it

    def evaluate(self, points) -> np.ndarray:
        """Off-grid values via the symmetric extension and cubic interpolation."""
        g = self.grid
        p = np.atleast_2d(np.asarray(points, dtype=float))
        it = self._interpolator()
        if g.dim == 1:
            return it(np.abs(p[:, :1]))
        rr = np.hypot(p[:, 0], p[:, 1])
        phi = np.mod(np.arctan2(p[:, 1], p[:, 0]), 2 * np.pi / g.k)
        phi = np.where(phi > np.pi / g.k, 2 * np.pi / g.k - phi, phi)
        if g.dim == 2:
            return it(np.column_stack([rr, phi]))
        return it(np.column_stack([np.abs(p[:, 2]), rr, phi]))

    def __add__(self, other):
        return SectorField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return SectorField(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return SectorField(self.grid, self.values * _vals(other))

    __rmul__ = __mul__

    def integral(self) -> float:
        return self.grid.integrate(self.values)

    def rows(self):
        """(r, theta, value) triples for CSV export (2D)."""
        g = self.grid
        R, T = np.meshgrid(g.r, g.theta, indexing="ij")
        return zip(R.ravel().tolist(), T.ravel().tolist(), self.values.tolist())


def _vals(x):
    return x.values if isinstance(x, SectorField) else x


def rotation_permutation(grid: SectorGrid, i: int) -> np.ndarray | None:
    """Node permutation p with (f o R_hat_i)[n] = f[p[n]], or None if not aligned."""
    s = grid.angle_shift(i)
    si = int(round(s))
    if abs(s - si) > 1e-9:
        return None
    j = grid.fold_index(np.arange(grid.n_theta) - si)
    idx = np.arange(grid.size).reshape(grid.shape)
    return idx[..., j].ravel()


def _spectral_shift(a: np.ndarray, grid: SectorGrid, i: int) -> np.ndarray:
    """Angular shift theta -> theta - shift of sector arrays (last axis theta)."""
    J = np.arange(2 * grid.k * grid.n_theta)
    full = a[..., grid.fold_index(J)]
    n = full.shape[-1]
    shift = 2 * math.pi * (i - 1) / (grid.m * grid.k)
    # f(theta - shift) by a phase ramp on the full-circle Fourier series
    freq = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        freq[n // 2] = 0.0
    spec = np.fft.fft(full, axis=-1) * np.exp(-1j * freq * shift)
    return np.real(np.fft.ifft(spec, axis=-1))[..., : grid.n_theta]


def rotate_field(f: SectorField, i: int) -> SectorField:
    """f o R_hat_i: exact re-indexing when aligned, spectral angular shift otherwise."""
    g = f.grid
    if g.dim == 1:
        return f
    perm = rotation_permutation(g, i)
    if perm is not None:
        return SectorField(g, f.values[perm])
    return SectorField(g, _spectral_shift(f.array(), g, i))


def rotation_matrix(grid: SectorGrid, i: int) -> sp.csr_matrix:
    """Sparse matrix of the linear map f -> f o R_hat_i on nodal values."""
    n = grid.size
    if grid.dim == 1 or i == 1:
        return sp.identity(n, format="csr")
    perm = rotation_permutation(grid, i)
    if perm is not None:
        return sp.csr_matrix((np.ones(n), (np.arange(n), perm)), shape=(n, n))
    M = _spectral_shift(np.eye(grid.n_theta), grid, i).T
    M[np.abs(M) < 1e-15] = 0.0
    return sp.kron(sp.identity(n // grid.n_theta), sp.csr_matrix(M), format="csr")


def bumps_at(profile, centers, points) -> np.ndarray:
    """sum_c U(|x - c|) at the given points."""
    points = np.asarray(points, dtype=float)
    out = np.zeros(len(points))
    for c in np.atleast_2d(centers):
        cc = np.zeros(points.shape[1])
        n = min(len(c), points.shape[1])
        cc[:n] = c[:n]
        out += profile(np.linalg.norm(points - cc, axis=1))
    return out


def bump_parts(profile, centers, points, gradient: bool = False):
    """Per-centre values U(|x - c|), shape (n_centres, n_points), and optionally gradients."""
    points = np.asarray(points, dtype=float)
    C = np.zeros((len(np.atleast_2d(centers)), points.shape[1]))
    c_in = np.atleast_2d(centers)
    n = min(c_in.shape[1], points.shape[1])
    C[:, :n] = c_in[:, :n]
    diff = points[None, :, :] - C[:, None, :]
    d = np.linalg.norm(diff, axis=-1)
    vals = profile(d.ravel()).reshape(d.shape)
    if not gradient:
        return vals
    du = profile.derivative(d.ravel()).reshape(d.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(d[..., None] > 0, diff / np.where(d > 0, d, 1.0)[..., None], 0.0)
    return vals, du[..., None] * unit


def assemble_sum_of_bumps(profile, cfg: PeakConfiguration, grid: SectorGrid, copy: int = 1) -> SectorField:
    """Nodal values of sum_j U(y - P_j/eps) in scaled coordinates.

    ``copy = i`` places the bumps at the rotated peaks P_ji.
    """
    if grid.r_out < cfg.t:
        raise ValueError(f"grid radius {grid.r_out} does not contain the peaks at {cfg.t}")
    return SectorField(grid, bumps_at(profile, cfg.scaled_peaks(copy), grid.points))
