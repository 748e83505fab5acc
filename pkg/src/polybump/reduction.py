"""Error terms, projections onto Z_eps and the constants of the reduced equation.

All fields are taken from an :class:`~polybump.ansatz.Ansatz`, i.e. nodal
arrays on the scaled grid z = y / eps. L^2 norms of the first-component
error are reported in the unscaled measure dy = eps^N dz; everything that
belongs to the second equation lives in the scaled variable already.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import elliptic as el
from .ansatz import Ansatz
from .balance import BalanceProblem, solve_balance
from .fitting import lstsq
from .geometry import build_peaks, construction_grid, bump_parts
from .params import sphere_area
from .shadow import Verdict, c_n, classify


class HypothesisError(ValueError):
    """The sign condition of the existence statement fails."""


def _cross(parts: np.ndarray):
    """(S^2 - sum U_j^2, S^3 - sum U_j^3) without cancellation.

    With O_j = S - U_j: S^2 - sum U_j^2 = sum U_j O_j and
    S^3 - sum U_j^3 = sum U_j O_j (S + U_j).
    """
    S = parts.sum(axis=0)
    O = S[None] - parts
    sq = np.sum(parts * O, axis=0)
    cu = np.sum(parts * O * (S[None] + parts), axis=0)
    return sq, cu


# --- error terms ---------------------------------------------------------------------

def e1_terms(a: Ansatz) -> dict[str, np.ndarray]:
    """The five summands of E1 (unscaled first equation)."""
    b, mu1 = a.beta, a.params.mu1
    Y, Phi = a.Y, a.phi
    Sc, Pc = a.copies, a.psi_copies
    return {
        "3mu1 b^2 Phi^2 Y": 3 * mu1 * b**2 * Phi**2 * Y,
        "mu1 b^3 Phi^3": mu1 * b**3 * Phi**3,
        "b^3 Y sum Psi_i^2": b**3 * Y * np.sum(Pc**2, axis=0),
        "2b^2 Y sum U_i Psi_i": 2 * b**2 * Y * np.sum(Sc * Pc, axis=0),
        "b^2 Phi sum Theta_i^2": b**2 * Phi * np.sum((Sc + b * Pc) ** 2, axis=0),
    }


def e2_terms(a: Ansatz) -> dict[str, np.ndarray]:
    """The nine summands of E2 (scaled second equation)."""
    b, mu2, al = a.beta, a.params.mu2, a.params.alpha
    Y, Phi, Psi, S, Th = a.Y, a.phi, a.psi, a.S, a.theta
    Y0 = a.shadow.Y.u0
    sq, cu = _cross(a.parts)
    others = a.theta_copies[1:]
    return {
        "(omega0-omega) Theta": (a.shadow.omega0 - a.omega_values()) * Th,
        "2b^2 U (Y Phi - Y0 Phi0)": 2 * b**2 * S * (Y * Phi - Y0 * a.phi0),
        "b^3 Phi^2 Theta": b**3 * Phi**2 * Th,
        "2b^3 Psi Y Phi": 2 * b**3 * Psi * Y * Phi,
        "3mu2 b^2 U Psi^2": 3 * mu2 * b**2 * S * Psi**2,
        "mu2 b^3 Psi^3": mu2 * b**3 * Psi**3,
        "mu2 (U^3 - sum U_j^3)": mu2 * cu,
        "3mu2 b Psi (U^2 - sum U_j^2)": 3 * mu2 * b * Psi * sq,
        "alpha Theta sum Theta_i^2": al * Th * np.sum(others**2, axis=0) if len(others) else 0 * Th,
    }


def m_terms(a: Ansatz) -> dict[str, float]:
    """M1..M10: the norms bounding ||E2|| term by term."""
    g = a.grid
    Y, Phi, Psi, S, Th = a.Y, a.phi, a.psi, a.S, a.theta
    dw = a.shadow.omega0 - a.omega_values()
    sq, cu = _cross(a.parts)
    others = a.theta_copies[1:]
    six = Th * np.sum(others**2, axis=0) if len(others) else 0 * Th
    fields = [dw * S, dw * Psi, S * (Y * Phi - a.shadow.Y.u0 * a.phi0), cu, Psi * sq, six,
              Phi**2 * Th, Psi * Y * Phi, S * Psi**2, Psi**3]
    return {f"M{i}": l2(g, f) for i, f in enumerate(fields, 1)}


def l2(grid, f, measure: float = 1.0) -> float:
    return math.sqrt(measure * grid.integrate(np.asarray(f, dtype=float) ** 2))


@dataclass(frozen=True)
class ErrorReport:
    e1_l2: float
    e2_l2: float
    per_term: dict
    m_terms: dict
    epsilon: float
    rho: float
    deflation_l2: float  # || beta lambda Z ||: part of the residual not in E
    # sup |F(ansatz) + E + deflation| for both equations, relative to the
    # largest term of the discrete equation it is read off from
    ledger_defect: tuple[float, float]
    fitted_rates: dict = field(default_factory=dict)

    def rows(self):
        out = [("E1", self.e1_l2), ("E2", self.e2_l2), ("deflation", self.deflation_l2)]
        return out + list(self.per_term.items()) + list(self.m_terms.items())


def eval_error_terms(a: Ansatz, check_ledger: bool = True) -> ErrorReport:
    if not a.corrections and a.beta != 0:
        raise ValueError("error terms need the corrections Phi, Psi")
    g, N, eps = a.grid, a.params.dim, a.eps
    t1, t2 = e1_terms(a), e2_terms(a)
    E1, E2 = sum(t1.values()), sum(t2.values())
    mu = eps**N
    per = {f"E1: {k}": l2(g, v, mu) for k, v in t1.items()}
    per.update({f"E2: {k}": l2(g, v) for k, v in t2.items()})
    defl = a.beta * a.deflation * a.kernel.z.values
    ledger = (float("nan"), float("nan"))
    if check_ledger:
        from .solver import residual
        Fu, Fv = residual(a, *a.state())
        from .solver import term_scales
        su, sv = term_scales(a, *a.state())
        ledger = (float(np.max(np.abs(Fu / eps**2 + E1))) / max(su / eps**2, float(np.max(np.abs(E1)))),
                  float(np.max(np.abs(Fv + E2 + defl))) / max(sv, float(np.max(np.abs(E2)))))
    return ErrorReport(l2(g, E1, mu), l2(g, E2), per, m_terms(a), eps, a.rho, l2(g, defl), ledger)


# --- constants --------------------------------------------------------------------------

@dataclass(frozen=True)
class Constants:
    A: float
    b_tilde: float
    c_n: float
    b_tilde_identity: float  # (k/2) int U^2, equal to b_tilde after an integration by parts


def eval_constants(U, k: int) -> Constants:
    """b~ = k (-int x1^2/|x| U U' dx) = (k/N) |S^{N-1}| int_0^inf r^N (-U U') dr; A = c_n b~."""
    N = U.dim
    r_end = 40.0 / math.sqrt(U.omega)
    x, w = np.polynomial.legendre.leggauss(40)
    edges = np.linspace(0.0, r_end, 161)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    r = (mid[:, None] + half[:, None] * x).ravel()
    wr = (half[:, None] * w).ravel()
    u, du = U(r), U.derivative(r)
    area = sphere_area(N)
    bt = k / N * area * float(np.sum(wr * r**N * (-u * du)))
    ident = 0.5 * k * area * float(np.sum(wr * r ** (N - 1) * u * u))
    return Constants(c_n(N) * bt, bt, c_n(N), ident)


# --- projections ---------------------------------------------------------------------------

F_NAMES = ("F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9")


@dataclass(frozen=True)
class ProjectionReport:
    f_terms: dict
    p_terms: dict
    n_projection: float | None
    l2_projection: float | None
    deflation_term: float  # beta lambda int Z^2
    denom: float
    c_epsilon: float
    constants: Constants
    epsilon: float
    rho: float
    lap_omega0: float
    B1: float | None = None
    B2: float | None = None

    @property
    def f1_ratio(self) -> float:
        """F1 / (eps rho) against its limit -Delta omega(0) A."""
        return self.f_terms["F1"] / (self.epsilon * self.rho)

    @property
    def f1_limit(self) -> float:
        return -self.lap_omega0 * self.constants.A

    def dominance_ratios(self) -> dict:
        """|term| / (eps rho) for every evaluated contribution."""
        s = self.epsilon * self.rho
        out = {k: abs(v) / s for k, v in self.f_terms.items()}
        out.update({k: abs(v) / s for k, v in self.p_terms.items()})
        return out

    def rows(self):
        rows = list(self.f_terms.items()) + list(self.p_terms.items())
        rows += [("denom", self.denom), ("c_epsilon", self.c_epsilon), ("deflation", self.deflation_term),
                 ("A", self.constants.A), ("b_tilde", self.constants.b_tilde), ("c_n", self.constants.c_n)]
        if self.n_projection is not None:
            rows += [("N2 projection", self.n_projection), ("L2 projection", self.l2_projection)]
        return rows


def f_integrands(a: Ansatz) -> dict[str, np.ndarray]:
    """Summands of E2 in the grouping of F1..F9 (same nine pieces)."""
    t = e2_terms(a)
    return dict(zip(F_NAMES, [t["(omega0-omega) Theta"], t["2b^2 U (Y Phi - Y0 Phi0)"],
                              t["mu2 (U^3 - sum U_j^3)"], t["3mu2 b Psi (U^2 - sum U_j^2)"],
                              t["b^3 Phi^2 Theta"], t["2b^3 Psi Y Phi"], t["3mu2 b^2 U Psi^2"],
                              t["mu2 b^3 Psi^3"], t["alpha Theta sum Theta_i^2"]]))


def p_integrands(a: Ansatz, phi: np.ndarray, psi: np.ndarray) -> dict[str, np.ndarray]:
    """Signed pieces P1..P13 of L2(phi, psi) Z (coefficients included)."""
    b, mu2, al = a.beta, a.params.mu2, a.params.alpha
    Z, Zp, parts = a.kernel.z.values, a.kernel.z_parts, a.parts
    Y, Phi, Psi, S = a.Y, a.phi, a.psi, a.S
    Zsum = Zp.sum(axis=0)
    sq, _ = _cross(parts)
    u2z_cross = np.sum(parts**2 * (Zsum[None] - Zp), axis=0)  # sum_{i != j} U_j^2 Z_i
    m = a.params.m
    out = {
        "P1": (a.omega_values() - a.shadow.omega0) * Z * psi,
        "P2": -3 * mu2 * u2z_cross * psi,
        "P3": -3 * mu2 * sq * Z * psi,
        "P4": -3 * mu2 * b**2 * Psi**2 * Z * psi,
        "P5": -6 * mu2 * b * S * Psi * Z * psi,
        "P6": -(b**3) * Phi**2 * Z * psi,
        "P7": -2 * b**2 * Y * Phi * Z * psi,
        "P8": -2 * b**2 * Psi * Y * phi * Z,
        "P9": -2 * b**3 * Psi * Phi * phi * Z,
        "P10": -2 * b * S * Y * phi * Z,
        "P11": -2 * b**2 * S * Phi * phi * Z,
    }
    if m > 1:
        Th = a.theta
        thc = a.theta_copies[1:]
        psc = np.stack([a.rotated(psi, i) for i in range(2, m + 1)])
        out["P12"] = -2 * al * Th * np.sum(thc * psc, axis=0) * Z
        out["P13"] = -al * psi * np.sum(thc**2, axis=0) * Z
    else:
        out["P12"] = 0 * Z
        out["P13"] = 0 * Z
    return out


def n2_field(a: Ansatz, phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    b, mu2, al = a.beta, a.params.mu2, a.params.alpha
    Th, Ups = a.theta, a.upsilon
    out = mu2 * psi**2 * (3 * Th + psi) + b * psi * phi * (2 * Ups + phi) + b * Th * phi**2
    if a.params.m > 1:
        thc = a.theta_copies[1:]
        psc = np.stack([a.rotated(psi, i) for i in range(2, a.params.m + 1)])
        out = out + al * Th * np.sum(psc**2, axis=0) + al * psi * np.sum(2 * thc * psc + psc**2, axis=0)
    return out


def eval_projection(a: Ansatz, constants: Constants | None = None, remainder=None,
                    B1: float | None = None, B2: float | None = None) -> ProjectionReport:
    """F1..F9 = int (E2 pieces) Z and, with a remainder (phi, psi), P1..P13 and the N2 projection.

    c_eps = int (L2 - E2 - N2) Z / int Z^2, where E2 includes the deflation
    multiple of Z carried by Psi.
    """
    g = a.grid
    Z = a.kernel.z.values
    if constants is None:
        constants = eval_constants(a.U, a.params.k)
    F = {k: g.integrate(v * Z) for k, v in f_integrands(a).items()}
    defl = a.beta * a.deflation * a.kernel.norm_sq
    denom = a.kernel.norm_sq
    e2z = sum(F.values()) + defl
    P, nproj, lproj = {}, None, None
    if remainder is not None:
        phi, psi = (np.asarray(x, dtype=float) for x in remainder)
        P = {k: g.integrate(v) for k, v in p_integrands(a, phi, psi).items()}
        nproj = g.integrate(n2_field(a, phi, psi) * Z)
        lproj = l2_projection(a, phi, psi)
        num = lproj - e2z - nproj
    else:
        num = -e2z
    return ProjectionReport(F, P, nproj, lproj, defl, denom, num / denom, constants, a.eps, a.rho,
                            a.shadow.lap_omega0, B1, B2)


def l2_projection(a: Ansatz, phi, psi) -> float:
    """int L2(phi, psi) Z with L the discrete linearisation at the ansatz."""
    from .solver import jacobian
    op = jacobian(a, a.upsilon, a.theta)
    n = a.grid.size
    Lv = op.apply(np.concatenate([phi, psi]))[n:]
    return a.grid.integrate(Lv * a.kernel.z.values)


# --- B1, B2 ------------------------------------------------------------------------------------

@dataclass(frozen=True)
class PrefactorFit:
    name: str
    prefactor: float
    rate: float  # fitted exponential rate (free fit)
    power: float  # fixed power used in the fit
    predicted_rate: float
    window: tuple[float, float]
    samples: tuple[tuple[float, float], ...]
    residual: float  # max log deviation of the prefactor-only fit
    sign: float

    @property
    def rate_deviation(self) -> float:
        return abs(self.rate / self.predicted_rate - 1)


def interaction_grid(t: float, k: int, omega0: float, m: int = 1, h: float = 0.1, n_theta: int = 64):
    """Grid for ansatz-level projections at scaled radius t (no first component)."""
    s = math.sqrt(omega0)
    return construction_grid(t, 1.0, k, m, 2, omega0=omega0, h=h / s, n_theta=n_theta,
                             u_extent=0.0, v_margin=25.0 / s, growth=1.0 + 1e-9, hx_max=h / s)


def f3_value(U, k: int, t: float, grid=None) -> float:
    """F3 = mu2 int (U_rho^3 - sum U_j^3) Z on the scaled grid (depends on t only)."""
    if grid is None:
        grid = interaction_grid(t, k, U.omega)
    peaks = build_peaks(t, 1.0, k, 1, 2)
    parts = bump_parts(U, peaks.scaled_peaks(1), grid.points)
    ker = el.build_kernel(U, peaks, grid)
    _, cu = _cross(parts)
    return grid.integrate(U.mu * cu * ker.z.values)


def f9_value(U, k: int, m: int, alpha: float, t: float, grid=None) -> float:
    """F9 at the ansatz without corrections: alpha int U_rho sum_{i>=2} (U_rho o R_i)^2 Z."""
    if grid is None:
        grid = interaction_grid(t, k, U.omega, m)
    peaks = build_peaks(t, 1.0, k, m, 2)
    S = [bump_parts(U, peaks.scaled_peaks(i), grid.points).sum(axis=0) for i in range(1, m + 1)]
    ker = el.build_kernel(U, peaks, grid)
    return alpha * grid.integrate(S[0] * sum(x**2 for x in S[1:]) * ker.z.values)


def fit_prefactor(name: str, samples, rate: float, power: float, loglog: bool = False) -> PrefactorFit:
    """value ~ -sign B e^{-rate t} t^{-power} [log t]: B by a prefactor-only fit, rate by a free fit."""
    t = np.array([s[0] for s in samples], dtype=float)
    v = np.array([s[1] for s in samples], dtype=float)
    sign = float(np.sign(v[0]))
    if np.any(np.sign(v) != sign) or np.any(v == 0):
        raise ValueError(f"{name} changes sign on the window")
    y = np.log(np.abs(v)) + power * np.log(t) - (np.log(np.log(t)) if loglog else 0.0)
    logB = y + rate * t
    B = float(np.exp(np.mean(logB)))
    free = lstsq([np.ones_like(t), -t], y)
    return PrefactorFit(name, B, float(free.coef[1]), power, rate, (float(t[0]), float(t[-1])),
                        tuple(zip(t.tolist(), v.tolist())), float(np.max(np.abs(logB - np.mean(logB)))), sign)


def fit_B1(U, k: int, t_values, dim: int = 2) -> PrefactorFit:
    s = math.sqrt(U.omega)
    rate = 2 * s * math.sin(math.pi / k)
    samples = [(t, f3_value(U, k, t)) for t in t_values]
    return fit_prefactor("B1", samples, rate, (dim - 1) / 2)


def fit_B2(U, k: int, m: int, alpha: float, t_values, dim: int = 2) -> PrefactorFit:
    s = math.sqrt(U.omega)
    rate = 4 * s * math.sin(math.pi / (m * k))
    samples = [(t, f9_value(U, k, m, alpha, t) / alpha) for t in t_values]
    power = 0.5 if dim == 2 else 2.0
    return fit_prefactor("B2", samples, rate, power, loglog=dim == 3)


# --- reduced equation ------------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedPrediction:
    rho: float
    t: float
    d_eff: float
    d_limit: float
    prefactors: tuple[float, float]
    case: str


def solve_reduced_d(params, shadow, constants: Constants, B: float, epsilon: float | None = None,
                    case: str | None = None) -> ReducedPrediction:
    """Calibrated peak radius from |Delta omega(0)| A eps rho = B e^{-rate t} t^{-p}.

    For alpha != 0 the right-hand side constant is |alpha| B2. Refuses when
    the sign condition of the existence statement is not met.
    """
    eps = params.epsilon if epsilon is None else epsilon
    verdict = classify(shadow, params.alpha)
    if verdict not in (Verdict.THEOREM1, Verdict.THEOREM2):
        raise HypothesisError(f"sign condition fails: Delta omega(0) = {shadow.lap_omega0:.4g}, "
                              f"alpha = {params.alpha} ({verdict.value})")
    case = case or ("alpha_zero" if params.alpha == 0 else "alpha_nonzero")
    rhs = B if case == "alpha_zero" else abs(params.alpha) * B
    lhs = abs(shadow.lap_omega0) * constants.A
    prob = BalanceProblem(case, shadow.omega0, params.k, params.m, params.dim, (lhs, rhs), eps)
    sol = solve_balance(prob)
    return ReducedPrediction(sol.rho, sol.t, sol.d_eff, prob.d_limit, (lhs, rhs), case)


def exponent_fit(eps, values, log_power: float = 0.0):
    """Slope p of log value = c + p log eps + log_power log|ln eps|, with its RSS."""
    eps = np.asarray(eps, dtype=float)
    y = np.log(np.asarray(values, dtype=float)) - log_power * np.log(np.abs(np.log(eps)))
    f = lstsq([np.ones_like(eps), np.log(eps)], y)
    return float(f.coef[1]), f
