"""Radial ground states of -U'' - (N-1)/r U' + V(r) U = mu U^3.

The profile is found by shooting on U(0) with bisection. The outward
solution is trusted only where the two bracketing shots still agree; past
that point the tail is obtained by integrating inward from the linear
decaying solution r^-nu K_nu(sqrt(omega) r), which is stable in that
direction, and scaling it to meet the outward branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.special import kve

from .params import sphere_area

RTOL = 1e-13


class ShootingError(RuntimeError):
    def __init__(self, message, bracket=None, classes=None):
        super().__init__(f"{message} (bracket={bracket}, classes={classes})")
        self.bracket = bracket
        self.classes = classes


def _tail_shape(r, omega, dim, deriv=False):
    """x^-nu K_nu(x) at x = sqrt(omega) r (or its r-derivative), nu = (dim-2)/2."""
    nu = (dim - 2) / 2
    s = math.sqrt(omega)
    x = s * np.asarray(r, dtype=float)
    if deriv:
        return -s * kve(nu + 1, x) * np.exp(-x) * x ** (-nu)
    return kve(nu, x) * np.exp(-x) * x ** (-nu)


@dataclass(frozen=True)
class DecayFit:
    C0: float
    rate: float
    power: float
    r_window: tuple[float, float]
    residual: float


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Sampled radial profile on a uniform grid with an analytic tail beyond it."""

    omega: float
    mu: float
    dim: int
    grid: np.ndarray
    values: np.ndarray
    derivative_values: np.ndarray
    tail_coeff: float  # U = tail_coeff * x^-nu K_nu(x) for r >= grid[-1]
    potential: Callable | None = field(default=None, repr=False)
    bracket: tuple[float, float] = (0.0, 0.0)
    r_match: float = 0.0

    def __post_init__(self):
        second = self._second(self.grid, self.values, self.derivative_values)
        object.__setattr__(self, "_u", CubicHermiteSpline(self.grid, self.values, self.derivative_values))
        object.__setattr__(self, "_du", CubicHermiteSpline(self.grid, self.derivative_values, second))

    def _V(self, r):
        if self.potential is None:
            return np.full_like(np.asarray(r, dtype=float), self.omega)
        return self.potential(r)

    def potential_at(self, r):
        """The potential of the profile equation at radius r."""
        return self._V(r)

    def _second(self, r, u, du):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lin = np.where(r > 0, (self.dim - 1) * du / np.where(r > 0, r, 1.0), 0.0)
        out = self._V(r) * u - self.mu * u**3 - lin
        # at r = 0: U'' = (V U - mu U^3) / dim
        return np.where(r > 0, out, (self._V(r) * u - self.mu * u**3) / self.dim)

    @property
    def u0(self) -> float:
        return float(self.values[0])

    @property
    def r_max(self) -> float:
        return float(self.grid[-1])

    @property
    def decay_rate(self) -> float:
        return math.sqrt(self.omega)

    @property
    def decay_power(self) -> float:
        return (self.dim - 1) / 2

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        inside = r <= self.r_max
        out = np.empty_like(r)
        out[inside] = self._u(r[inside])
        rr = r[~inside]
        out[~inside] = self.tail_coeff * _tail_shape(rr, self.omega, self.dim)
        return out

    def derivative(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        inside = r <= self.r_max
        out = np.empty_like(r)
        out[inside] = self._du(r[inside])
        out[~inside] = self.tail_coeff * _tail_shape(r[~inside], self.omega, self.dim, deriv=True)
        return out

    def second_derivative(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        return self._second(r, self(r), self.derivative(r))

    def ode_residual(self) -> float:
        """Sup-norm residual of the radial ODE on the grid.

        U'' is taken from a sixth-order difference of the stored U' values.
        """
        r, u, du = self.grid, self.values, self.derivative_values
        h = r[1] - r[0]
        c = np.array([-1, 9, -45, 0, 45, -9, 1]) / 60.0
        ext = np.concatenate([-du[3:0:-1], du])  # U' is odd
        d2 = sum(ci * ext[i:i + len(du) - 3] for i, ci in enumerate(c)) / h
        idx = np.arange(len(d2))
        res = d2 - self._second(r[idx], u[idx], du[idx])
        return float(np.max(np.abs(res)))

    def energy_identity_defect(self) -> float:
        """Relative defect of  int|U'|^2 + int V U^2 = mu int U^4."""
        r = np.linspace(0.0, self.r_max, 40001)
        w = sphere_area(self.dim) * r ** (self.dim - 1)
        u, du = self(r), self.derivative(r)
        kin = simpson(w * du**2, r)
        pot = simpson(w * self._V(r) * u**2, r)
        nl = simpson(w * self.mu * u**4, r)
        return abs(kin + pot - nl) / nl

    def to_json(self) -> dict:
        fit = fit_decay(self, (10 / self.decay_rate, 20 / self.decay_rate))
        return {"omega": self.omega, "mu": self.mu, "dim": self.dim, "U0": self.u0,
                "r_max": self.r_max, "r_match": self.r_match, "tail_coeff": self.tail_coeff,
                "C0": fit.C0, "rate": fit.rate, "power": fit.power,
                "bracket": list(self.bracket)}

    def export(self, stem: str | Path) -> tuple[Path, Path]:
        from .io import write_csv, write_json
        stem = Path(stem)
        csv_path = stem.with_suffix(".csv")
        write_csv(csv_path, ["r", "U"], zip(self.grid.tolist(), self.values.tolist()))
        json_path = stem.with_suffix(".json")
        write_json(json_path, self.to_json())
        return csv_path, json_path


# --- shooting -------------------------------------------------------------------

def _rhs(V, mu, dim):
    def f(r, y):
        u, p = y
        return [p, -(dim - 1) / r * p + V(r) * u - mu * u**3]
    return f


def _initial(u0, V0, mu, dim, r0):
    a = (V0 * u0 - mu * u0**3) / (2 * dim)
    return [u0 + a * r0**2, 2 * a * r0]


def _shoot(u0, V, mu, dim, r_end, dense=False):
    """+1 overshoot (U hits zero), -1 undershoot (U turns up), 0 undecided."""
    r0 = 1e-8
    def hit_zero(r, y):
        return y[0]
    hit_zero.terminal = True
    def turn(r, y):
        return y[1]
    turn.terminal = True
    turn.direction = 1
    sol = solve_ivp(_rhs(V, mu, dim), (r0, r_end), _initial(u0, float(V(0.0)), mu, dim, r0),
                    method="DOP853", rtol=RTOL, atol=1e-300, events=[hit_zero, turn],
                    dense_output=dense)
    if sol.t_events[0].size:
        return 1, sol
    if sol.t_events[1].size:
        return -1, sol
    return 0, sol


def _bisect(V, mu, dim, scale, r_end):
    lo, hi = 0.05 * scale, 8.0 * scale
    for _ in range(40):
        if _shoot(lo, V, mu, dim, r_end)[0] < 0:
            break
        lo /= 2
    else:
        raise ShootingError("no undershoot found", (lo, hi))
    for _ in range(40):
        if _shoot(hi, V, mu, dim, r_end)[0] > 0:
            break
        hi *= 2
    else:
        raise ShootingError("no overshoot found", (lo, hi))
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return lo, hi
        c = _shoot(mid, V, mu, dim, r_end)[0]
        if c > 0:
            hi = mid
        elif c < 0:
            lo = mid
        else:
            return mid, mid


def solve_radial_state(V: Callable, mu: float, dim: int, omega_far: float,
                       r_max: float | None = None, h: float | None = None,
                       constant: bool = False) -> RadialProfile:
    """Positive radial solution of -Delta U + V(r) U = mu U^3.

    ``omega_far`` sets the exponential tail rate sqrt(omega_far).
    """
    if dim not in (1, 2, 3) or not mu > 0 or not omega_far > 0:
        raise ValueError("need dim in {1,2,3}, mu > 0, omega_far > 0")
    s = math.sqrt(omega_far)
    r_max = 40.0 / s if r_max is None else r_max
    h = 0.005 / s if h is None else h
    scale = math.sqrt(max(float(V(0.0)), omega_far) / mu)
    lo, hi = _bisect(V, mu, dim, scale, 2 * r_max)

    _, s_lo = _shoot(lo, V, mu, dim, 2 * r_max, dense=True)
    _, s_hi = _shoot(hi, V, mu, dim, 2 * r_max, dense=True)
    t_end = min(s_lo.t[-1], s_hi.t[-1])
    probe = np.linspace(1e-8, t_end, 20001)
    a, b = s_lo.sol(probe)[0], s_hi.sol(probe)[0]
    bad = np.abs(a - b) > 1e-11 * np.abs(a + b)
    r_match = float(probe[np.argmax(bad)] if bad.any() else t_end)
    r_match = min(r_match, 0.8 * r_max)
    # last point where the branch is trusted, and its value there
    out_branch = lambda r: 0.5 * (s_lo.sol(r) + s_hi.sol(r))
    u_m = float(out_branch(r_match)[0])

    # inward integration from the linear tail, scaled so U(r_match) agrees
    r_far = r_max
    rhs = _rhs(V, mu, dim)
    C = u_m / float(_tail_shape(r_match, omega_far, dim))
    for _ in range(6):
        y0 = [C * float(_tail_shape(r_far, omega_far, dim)),
              C * float(_tail_shape(r_far, omega_far, dim, deriv=True))]
        inner = solve_ivp(rhs, (r_far, r_match), y0, method="DOP853", rtol=RTOL,
                          atol=1e-300, dense_output=True)
        got = float(inner.sol(r_match)[0])
        if abs(got / u_m - 1) < 1e-15:
            break
        C *= u_m / got

    n = int(math.ceil(r_max / h))
    grid = np.linspace(0.0, r_max, n + 1)
    values = np.empty_like(grid)
    dvals = np.empty_like(grid)
    i_in = grid <= r_match
    out_pts = out_branch(np.maximum(grid[i_in], 1e-8))
    values[i_in], dvals[i_in] = out_pts
    in_pts = inner.sol(grid[~i_in])
    values[~i_in], dvals[~i_in] = in_pts
    u0 = 0.5 * (lo + hi)
    values[0], dvals[0] = u0, 0.0

    potential = None if constant else V
    return RadialProfile(omega=float(omega_far), mu=float(mu), dim=int(dim), grid=grid,
                         values=values, derivative_values=dvals, tail_coeff=C,
                         potential=potential, bracket=(lo, hi), r_match=r_match)


def solve_ground_state(omega: float, mu: float, dim: int, h: float | None = None) -> RadialProfile:
    """Ground state of -Delta U + omega U = mu U^3 in R^dim."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    V = lambda r: np.full_like(np.asarray(r, dtype=float), omega)
    return solve_radial_state(V, mu, dim, omega, h=h, constant=True)


def fit_decay(profile, window: tuple[float, float], n: int = 200) -> DecayFit:
    """Least squares of log U against log C0 - rate r - power log r."""
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError("window must satisfy 0 < r_lo < r_hi")
    r = np.linspace(lo, hi, n)
    if hasattr(profile, "grid") and np.count_nonzero((profile.grid >= lo) & (profile.grid <= hi)) < 10 \
            and hi <= profile.r_max:
        raise ValueError("fit window holds fewer than 10 grid points")
    u = profile(r)
    if np.any(u <= 0) or not np.all(np.isfinite(np.log(u))):
        raise ValueError("profile underflows on the fit window")
    A = np.column_stack([np.ones_like(r), -r, -np.log(r)])
    coef, *_ = np.linalg.lstsq(A, np.log(u), rcond=None)
    resid = float(np.max(np.abs(A @ coef - np.log(u))))
    return DecayFit(C0=float(np.exp(coef[0])), rate=float(coef[1]), power=float(coef[2]),
                    r_window=(lo, hi), residual=resid)


def rescale(profile: RadialProfile, lam: float, mu: float) -> RadialProfile:
    """U_{lam,mu}(r) = sqrt(lam/mu) U(sqrt(lam) r) from the (1, 1) reference."""
    if profile.omega != 1.0 or profile.mu != 1.0 or profile.potential is not None:
        raise ValueError("rescale needs the omega = 1, mu = 1 reference profile")
    if not (lam > 0 and mu > 0):
        raise ValueError("lam and mu must be positive")
    a, s = math.sqrt(lam / mu), math.sqrt(lam)
    return RadialProfile(omega=float(lam), mu=float(mu), dim=profile.dim,
                         grid=profile.grid / s, values=a * profile.values,
                         derivative_values=a * s * profile.derivative_values,
                         tail_coeff=a * profile.tail_coeff,
                         bracket=(a * profile.bracket[0], a * profile.bracket[1]),
                         r_match=profile.r_match / s)


_REFERENCE: dict[int, RadialProfile] = {}


def reference_profile(dim: int) -> RadialProfile:
    """Cached (omega=1, mu=1) ground state."""
    if dim not in _REFERENCE:
        _REFERENCE[dim] = solve_ground_state(1.0, 1.0, dim)
    return _REFERENCE[dim]


def ground_state(omega: float, mu: float, dim: int) -> RadialProfile:
    """Ground state obtained by rescaling the cached reference."""
    return rescale(reference_profile(dim), omega, mu)
