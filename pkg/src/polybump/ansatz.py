"""The approximate solution (Upsilon, Theta) = (Y + beta Phi, U_rho + beta Psi) on the scaled grid.

Everything is stored as nodal arrays on one grid in z = y / eps. The analytic
parts Y(eps z) and U_j carry their exact Laplacians, which the residual
uses instead of the discrete one ("defect correction"): the discrete residual
then measures only what the remainder does, not the O(h^2) truncation error
of the profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import elliptic as el
from .geometry import PeakConfiguration, SectorField, SectorGrid, bump_parts, build_peaks, rotate_field
from .params import PotentialSpec, SystemParams
from .radial import RadialProfile, ground_state


@dataclass(frozen=True, eq=False)
class Ansatz:
    params: SystemParams
    shadow: object
    U: RadialProfile
    peaks: PeakConfiguration
    grid: SectorGrid
    V: PotentialSpec
    W: PotentialSpec
    Y: np.ndarray  # Y(eps z)
    parts: np.ndarray  # (k, n): U_j, unrotated
    copies: np.ndarray  # (m, n): U_rho o R_i
    phi: np.ndarray
    psi: np.ndarray
    phi0: float
    kernel: el.KernelBasis
    deflation: float
    corrections: bool = True
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def eps(self) -> float:
        return self.peaks.epsilon

    @property
    def rho(self) -> float:
        return self.peaks.rho

    @property
    def S(self) -> np.ndarray:
        return self.copies[0]

    @property
    def beta(self) -> float:
        return self.params.beta

    @property
    def upsilon(self) -> np.ndarray:
        return self.Y + self.beta * self.phi

    @property
    def theta(self) -> np.ndarray:
        return self.S + self.beta * self.psi

    def state(self, dtype=np.longdouble) -> tuple[np.ndarray, np.ndarray]:
        """(Upsilon, Theta) summed in ``dtype``; the float64 sums lose the
        low bits of beta Phi, which the residual near the axis amplifies."""
        b = dtype(self.beta)
        return (self.Y.astype(dtype) + b * self.phi.astype(dtype),
                self.S.astype(dtype) + b * self.psi.astype(dtype))

    def rotated(self, a: np.ndarray, i: int) -> np.ndarray:
        return rotate_field(SectorField(self.grid, a), i).values

    @property
    def psi_copies(self) -> np.ndarray:
        return np.stack([self.rotated(self.psi, i) for i in range(1, self.params.m + 1)])

    @property
    def theta_copies(self) -> np.ndarray:
        return self.copies + self.beta * self.psi_copies

    def analytic(self) -> tuple[np.ndarray, np.ndarray]:
        """Parts of (u, v) whose Laplacian is taken exactly: Y(eps z) and U_rho."""
        return self.Y, self.S

    def analytic_laplacian(self) -> tuple[np.ndarray, np.ndarray]:
        """(-Delta_z Y(eps z), -Delta_z U_rho) from the profile equations."""
        eps, Y, U = self.eps, self.Y, self.U
        Vn = self.V(eps * self.grid.radius())
        lu = eps**2 * (self.params.mu1 * Y**3 - Vn * Y)
        lv = np.sum(U.mu * self.parts**3 - U.omega * self.parts, axis=0)
        return lu, lv

    def omega_values(self) -> np.ndarray:
        """omega(eps z) = W - beta Y^2."""
        return self.shadow(self.eps * self.grid.radius())

    def fields(self) -> dict:
        return {"Y": self.Y, "U_rho": self.S, "Phi": self.phi, "Psi": self.psi, "Z": self.kernel.z.values,
                "Upsilon": self.upsilon, "Theta": self.theta}


def build_ansatz(params: SystemParams, shadow, V: PotentialSpec, W: PotentialSpec, rho: float,
                 grid: SectorGrid, U: RadialProfile | None = None, corrections: bool = True,
                 tol: float = 1e-9) -> Ansatz:
    """Assemble the ansatz at peak radius ``rho`` on ``grid`` (scaled by params.epsilon).

    ``corrections=False`` sets Phi = Psi = 0 (the naive sum of bumps).
    """
    p = params
    eps = p.epsilon
    if U is None:
        U = ground_state(shadow.omega0, p.mu2, p.dim)
    peaks = build_peaks(rho, eps, p.k, p.m, p.dim)
    pts = grid.points
    parts = bump_parts(U, peaks.scaled_peaks(1), pts)
    copies = np.stack([parts.sum(axis=0)] + [bump_parts(U, peaks.scaled_peaks(i), pts).sum(axis=0)
                                             for i in range(2, p.m + 1)])
    Y = shadow.Y(eps * grid.radius())
    kernel = el.build_kernel(U, peaks, grid)
    n = grid.size
    if corrections:
        op1 = el.first_component_operator(shadow.Y, grid, eps)
        f = eps**2 * Y * np.sum(copies**2, axis=0)
        ph = el.solve_phi(shadow, U, peaks, grid, op=op1, rhs=f, tol=tol)
        ps = el.solve_psi(shadow, U, peaks, grid, ph.at_origin, kernel, beta=p.beta, tol=tol)
        phi, psi, phi0, lam = ph.field.values, ps.field.values, ph.at_origin, ps.deflation
        extras = {"phi_residual": ph.residual, "psi_residual": ps.residual, "z_component": ps.z_component}
    else:
        phi, psi, phi0, lam, extras = np.zeros(n), np.zeros(n), 0.0, 0.0, {}
    return Ansatz(p, shadow, U, peaks, grid, V, W, Y, parts, copies, phi, psi, phi0, kernel, lam,
                  corrections, extras)


def default_grid(params: SystemParams, omega0: float, t: float, h: float = 0.1, n_theta: int = 64,
                 **kw) -> SectorGrid:
    """Construction grid with spacing ``h`` measured in bump widths 1 / sqrt(omega0)."""
    from .geometry import construction_grid
    return construction_grid(t, params.epsilon, params.k, params.m, params.dim, omega0=omega0,
                             h=h / math.sqrt(omega0), n_theta=n_theta, **kw)
