"""Newton solves of the scaled system, continuation in eps and remainder diagnostics.

Unknowns (u, v) live on the scaled grid z = y / eps. The discrete equations
are

    F_u = -Delta_h (u - Y) + [-Delta Y] + eps^2 (V u - mu1 u^3 - beta u sum_i v_i^2),
    F_v = -Delta_h (v - U_rho) + [-Delta U_rho] + W v - mu2 v^3 - beta v u^2 - alpha v sum_{i>=2} v_i^2,

with v_i = v o R_i and the bracketed Laplacians of the analytic ansatz parts
taken exactly. The first row is the first equation times eps^2. Iterates are
kept in extended precision and residuals are evaluated there; corrections
come from a double precision factorisation of the analytic Jacobian, which
is mixed-precision iterative refinement once Newton has converged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import elliptic as el
from .ansatz import Ansatz, build_ansatz
from .fitting import lstsq
from .geometry import SectorField, rotation_matrix, rotation_permutation

LD = np.longdouble


class NewtonError(RuntimeError):
    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = tuple(history)


class CollapseError(NewtonError):
    pass


# --- residual and Jacobian -------------------------------------------------------------

def _ld_stiffness(grid, kappa):
    cache = grid.__dict__.setdefault("_cached", {})
    key = ("K_ld", kappa)
    if key not in cache:
        cache[key] = el.stiffness(grid, kappa).astype(LD)
    return cache[key]


def _rotate(grid, x, i):
    if i == 1:
        return x
    perm = rotation_permutation(grid, i)
    if perm is not None:
        return x[perm]
    R = rotation_matrix(grid, i)
    return R.astype(x.dtype) @ x


def residual(a: Ansatz, u, v, dtype=LD, defect: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """(F_u, F_v) at (u, v); both rows in the scaled (z) form.

    ``defect=False`` applies the discrete Laplacian to the whole of u and v.
    """
    p, g, eps = a.params, a.grid, a.eps
    u = np.asarray(u, dtype=dtype)
    v = np.asarray(v, dtype=dtype)
    ku, kv = el.far_kappas(a.V, a.W, g, eps)
    if dtype == LD:
        Ku, Kv = _ld_stiffness(g, ku), _ld_stiffness(g, kv)
    else:
        Ku, Kv = el.stiffness(g, ku), el.stiffness(g, kv)
    w = g.volumes.astype(dtype)
    if defect:
        Ya, Sa = (x.astype(dtype) for x in a.analytic())
        lu, lv = (x.astype(dtype) for x in a.analytic_laplacian())
    else:
        Ya = Sa = lu = lv = dtype(0)
    rho = eps * g.radius()
    Vn, Wn = a.V(rho).astype(dtype), a.W(rho).astype(dtype)
    vi = [_rotate(g, v, i) for i in range(1, p.m + 1)]
    sv2 = sum(x * x for x in vi)
    Fu = (Ku @ (u - Ya)) / w + lu + dtype(eps) ** 2 * (Vn * u - dtype(p.mu1) * u**3 - dtype(p.beta) * u * sv2)
    Fv = (Kv @ (v - Sa)) / w + lv + Wn * v - dtype(p.mu2) * v**3 - dtype(p.beta) * v * u * u
    if p.m > 1 and p.alpha != 0:
        Fv = Fv - dtype(p.alpha) * v * sum(x * x for x in vi[1:])
    return Fu, Fv


def term_scales(a: Ansatz, u, v) -> tuple[float, float]:
    """Size of the largest discrete term in each equation: sup |K| |x - analytic| / w
    together with the analytic Laplacians."""
    g, eps = a.grid, a.eps
    ku, kv = el.far_kappas(a.V, a.W, g, eps)
    w = g.volumes
    Ya, Sa = a.analytic()
    lu, lv = a.analytic_laplacian()
    out = []
    for K, x, x0, l in ((el.stiffness(g, ku), u, Ya, lu), (el.stiffness(g, kv), v, Sa, lv)):
        d = np.abs(np.asarray(x, dtype=float) - x0)
        out.append(max(float(np.max(abs(K) @ d / w)), float(np.max(np.abs(l)))))
    return out[0], out[1]


def residual_norm(F) -> float:
    return float(max(np.max(np.abs(F[0])), np.max(np.abs(F[1]))))


def jacobian(a: Ansatz, u, v) -> el.LinearOperatorSpec:
    return el.coupled_operator(a.params, a.V, a.W, a.grid, a.eps, np.asarray(u, dtype=float),
                               np.asarray(v, dtype=float))


# --- Newton -------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SolveResult:
    u: SectorField
    v: SectorField
    residual: float
    newton_iters: int
    peak_t: float  # scaled peak radius
    epsilon: float
    history: tuple  # (residual, step) per iteration
    u_ld: np.ndarray = field(repr=False, default=None)
    v_ld: np.ndarray = field(repr=False, default=None)
    remainder_norms: tuple[float, float] | None = None

    @property
    def peak_radius(self) -> float:
        """Peak radius in the original variable."""
        return self.epsilon * self.peak_t

    @property
    def d_eff(self) -> float:
        return self.peak_radius / (self.epsilon * abs(math.log(self.epsilon)))

    @property
    def positive(self) -> bool:
        return bool(np.min(self.u.values) > -1e-8 * np.max(self.u.values)
                    and np.min(self.v.values) > -1e-8 * np.max(self.v.values))


def _positive(x, floor=1e-8) -> bool:
    return bool(np.min(x) > -floor * np.max(x))


def peak_radius(v: SectorField) -> float:
    """Argmax radius of v along theta = 0 (scaled units).

    The theta = 0 values are extrapolated from the first two angular
    columns (v is even in theta); the maximum is located by a parabola
    through the largest sample and its neighbours.
    """
    g = v.grid
    a = v.array() if g.dim == 2 else v.array()[0]
    if g.n_theta > 1:
        t0, t1 = g.theta[0], g.theta[1]
        col = (t1**2 * a[:, 0] - t0**2 * a[:, 1]) / (t1**2 - t0**2)
    else:
        col = a[:, 0]
    i = int(np.argmax(col))
    if i == 0 or i == len(col) - 1:
        return float(g.r[i])
    r = g.r[i - 1:i + 2]
    c = np.polyfit(r - r[1], col[i - 1:i + 2], 2)
    if c[0] >= 0:
        return float(g.r[i])
    return float(r[1] - c[1] / (2 * c[0]))


def newton_solve(a: Ansatz, initial=None, tol: float = 1e-10, max_iter: int = 50,
                 min_step: float = 2.0**-20, defect: bool = True, verbose: bool = False) -> SolveResult:
    """Damped Newton on (F_u, F_v) = 0 starting from the ansatz (or ``initial``)."""
    g = a.grid
    if initial is None:
        u, v = a.state(LD)
    else:
        u, v = (np.asarray(x).astype(LD) for x in initial)
    F = residual(a, u, v, defect=defect)
    nrm = residual_norm(F)
    hist = [(nrm, 0.0)]
    h = g.r_faces[1] - g.r_faces[0]
    it = 0
    while nrm >= tol:
        if it >= max_iter:
            raise NewtonError(f"no convergence after {max_iter} iterations (residual {nrm:.3e})", hist)
        it += 1
        J = jacobian(a, u, v)
        rhs = -np.concatenate([np.asarray(F[0], dtype=float), np.asarray(F[1], dtype=float)])
        dx = J.solve(rhs)
        du, dv = dx[:g.size].astype(LD), dx[g.size:].astype(LD)
        step = 1.0
        while True:
            un, vn = u + LD(step) * du, v + LD(step) * dv
            if _positive(vn) and _positive(un):
                Fn = residual(a, un, vn, defect=defect)
                nn = residual_norm(Fn)
                if nn < (1 - 1e-4 * step) * nrm or nn < tol:
                    break
            step *= 0.5
            if step < min_step:
                raise NewtonError(f"line search failed at residual {nrm:.3e}", hist)
        u, v, F, nrm = un, vn, Fn, nn
        hist.append((nrm, step))
        if verbose:
            print(f"  newton {it}: residual {nrm:.3e} step {step:g}", flush=True)
        t = peak_radius(SectorField(g, np.asarray(v, dtype=float)))
        if t < h:
            raise CollapseError(f"peaks collapsed to the origin (t = {t:.3g})", hist)
    vf = SectorField(g, np.asarray(v, dtype=float))
    return SolveResult(SectorField(g, np.asarray(u, dtype=float)), vf, nrm, it, peak_radius(vf), a.eps,
                       tuple(hist), u, v)


# --- remainder -----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Remainder:
    phi: np.ndarray
    psi: np.ndarray
    norms: tuple[float, float]  # discrete ||phi||_V (unscaled), ||psi||_W
    orthogonality: float  # |int psi Z| / (||psi|| ||Z||)
    rho: float

    @property
    def total(self) -> float:
        return self.norms[0] + self.norms[1]


def h2_norms(a: Ansatz, phi, psi) -> tuple[float, float]:
    """Discrete H^2-type norms: (int (Delta f)^2 + |grad f|^2 + P f^2)^(1/2).

    phi is measured in the unscaled variable y = eps z (so the three pieces
    carry eps^(N-4), eps^(N-2), eps^N), psi in the scaled one.
    """
    g, eps, N = a.grid, a.eps, a.params.dim
    ku, kv = el.far_kappas(a.V, a.W, g, eps)
    w = g.volumes
    rho = eps * g.radius()
    out = []
    for f, kap, P, sc in ((phi, ku, a.V(rho), True), (psi, kv, a.W(rho), False)):
        f = np.asarray(f, dtype=float)
        K = el.stiffness(g, kap)
        lap = (K @ f) / w
        grad2 = g.group_order * float(f @ (K @ f))
        pot = g.integrate(P * f * f)
        if sc:
            val = eps ** (N - 4) * g.integrate(lap**2) + eps ** (N - 2) * grad2 + eps**N * pot
        else:
            val = g.integrate(lap**2) + grad2 + pot
        out.append(math.sqrt(max(val, 0.0)))
    return out[0], out[1]


def extract_remainder(result: SolveResult, a: Ansatz) -> Remainder:
    """phi = u - Upsilon, psi = v - Theta on the common grid, with norms and the Z-orthogonality defect."""
    g = a.grid
    u = result.u_ld if result.u_ld is not None else result.u.values
    v = result.v_ld if result.v_ld is not None else result.v.values
    ups, th = a.state(LD)
    phi = np.asarray(u - ups, dtype=float)
    psi = np.asarray(v - th, dtype=float)
    z = a.kernel.z.values
    npsi = math.sqrt(g.integrate(psi * psi))
    orth = abs(g.integrate(psi * z)) / (npsi * math.sqrt(a.kernel.norm_sq)) if npsi > 0 else 0.0
    return Remainder(phi, psi, h2_norms(a, phi, psi), orth, a.rho)


def project_radius(result: SolveResult, params, shadow, V, W, grid, rho0: float, U=None,
                   tol: float = 1e-10, max_iter: int = 30):
    """rho* with int (v - Theta_rho*) Z_rho* = 0, by secant iteration from rho0.

    Returns (rho*, ansatz at rho*, remainder).
    """
    v = result.v.values

    def g_of(r):
        a = build_ansatz(params, shadow, V, W, r, grid, U=U)
        return grid.integrate((v - a.theta) * a.kernel.z.values), a

    r0, r1 = rho0, rho0 * 1.01
    g0, _ = g_of(r0)
    g1, a1 = g_of(r1)
    for _ in range(max_iter):
        if g1 == g0:
            break
        r2 = r1 - g1 * (r1 - r0) / (g1 - g0)
        r0, g0 = r1, g1
        r1 = r2
        g1, a1 = g_of(r1)
        if abs(r1 - r0) < tol * r1:
            break
    return r1, a1, extract_remainder(result, a1)


@dataclass(frozen=True, eq=False)
class AnchoredSolve:
    """Solution whose defect-correction anchor coincides with its own projected radius."""

    result: SolveResult
    ansatz: Ansatz  # ansatz at the anchor rho
    remainder: Remainder
    rho: float
    history: tuple  # (t_anchor, t_projected - t_anchor) per evaluation

    @property
    def t(self) -> float:
        return self.rho / self.ansatz.eps


def anchored_solve(params, shadow, V, W, rho0: float, grid, U=None, initial=None, tol: float = 1e-10,
                   t_tol: float = 1e-9, max_iter: int = 12, verbose: bool = False) -> AnchoredSolve:
    """Newton solve with the analytic part of the residual placed at the solution's own radius.

    The defect-corrected residual applies the exact Laplacian to U_rho at
    the anchor rho, so the discrete problem prefers peaks at the anchor by
    an amount of order h^2. Choosing rho as a fixed point of
    rho -> rho*(solution at anchor rho) removes that pull; the remainder
    is then orthogonal to Z at the anchor. Secant iteration on t = rho / eps.
    """
    eps = params.epsilon
    state = {"init": initial}
    hist = []

    def G(t):
        a = build_ansatz(params, shadow, V, W, eps * t, grid, U=U)
        res = newton_solve(a, state["init"], tol=tol, verbose=verbose)
        state["init"] = (res.u_ld, res.v_ld)
        rs, a_star, rem = project_radius(res, params, shadow, V, W, grid, eps * t, U=a.U)
        hist.append((t, rs / eps - t))
        if verbose:
            print(f"  anchor t {t:.10f}: projected t {rs / eps:.10f}", flush=True)
        return rs / eps - t, res, a, rem

    ta = rho0 / eps
    ga, res, a, rem = G(ta)
    tb = ta + ga
    for _ in range(max_iter):
        gb, res, a, rem = G(tb)
        if abs(gb) < t_tol * tb or gb == ga:
            break
        ta, ga, tb = tb, gb, tb - gb * (tb - ta) / (gb - ga)
    else:
        raise NewtonError(f"anchor iteration did not settle (t = {tb:.6g}, gap {gb:.3g})", res.history)
    return AnchoredSolve(res, a, extract_remainder(res, a), eps * tb, tuple(hist))


# --- continuation -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ContinuationStep:
    epsilon: float
    rho_predicted: float  # radius the step was started from
    solve: AnchoredSolve

    @property
    def result(self) -> SolveResult:
        return self.solve.result

    @property
    def remainder(self) -> Remainder:
        return self.solve.remainder


@dataclass(frozen=True, eq=False)
class ContinuationTrace:
    steps: tuple
    failure: str | None = None

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([s.epsilon for s in self.steps])

    @property
    def d_eff(self) -> np.ndarray:
        return np.array([s.result.d_eff for s in self.steps])

    @property
    def remainder_totals(self) -> np.ndarray:
        return np.array([s.remainder.total for s in self.steps])

    def remainder_exponent(self, log_power: float = 2.0) -> float:
        """p in ||(phi, psi)|| ~ eps^p |ln eps|^log_power."""
        e = self.epsilons
        y = np.log(self.remainder_totals) - log_power * np.log(np.abs(np.log(e)))
        return float(lstsq([np.ones_like(e), np.log(e)], y).coef[1])

    def rows(self):
        for s in self.steps:
            r = s.result
            yield (s.epsilon, r.residual, r.newton_iters, r.peak_radius, r.d_eff, *s.remainder.norms)


def continue_in_epsilon(params, shadow, V, W, epsilons, rho_of, grid_of, U=None, warm: bool = True,
                        tol: float = 1e-10, verbose: bool = False) -> ContinuationTrace:
    """Anchored solves along decreasing eps.

    ``rho_of(eps)`` gives the starting radius and ``grid_of(eps, t)`` the
    grid. With ``warm`` the first Newton guess at each eps is the new
    ansatz plus the previous remainder re-sampled on the new grid (phi in
    the unscaled variable, psi in the scaled one), and the starting radius
    is the previous solution's d_eff carried to the new eps.
    """
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    steps = []
    prev = None
    for e in eps:
        p = params.with_(epsilon=e)
        rho = rho_of(e)
        init = None
        if warm and prev is not None:
            rho = prev.rho / (prev.ansatz.eps * abs(math.log(prev.ansatz.eps))) * e * abs(math.log(e))
        grid = grid_of(e, rho / e)
        if warm and prev is not None:
            a = build_ansatz(p, shadow, V, W, rho, grid, U=U)
            pts = grid.points
            phi = SectorField(prev.ansatz.grid, prev.remainder.phi).evaluate(pts * e / prev.ansatz.eps)
            psi = SectorField(prev.ansatz.grid, prev.remainder.psi).evaluate(pts)
            ups, th = a.state(LD)
            init = (ups + phi, th + psi)
        try:
            sol = anchored_solve(p, shadow, V, W, rho, grid, U=U, initial=init, tol=tol)
        except NewtonError as exc:
            return ContinuationTrace(tuple(steps), f"eps = {e}: {exc}")
        steps.append(ContinuationStep(e, rho, sol))
        prev = sol
        if verbose:
            r = sol.result
            print(f"eps {e}: residual {r.residual:.2e} iters {r.newton_iters} t {sol.t:.6f} "
                  f"t_peak {r.peak_t:.6f} remainder {sol.remainder.total:.3e}", flush=True)
    return ContinuationTrace(tuple(steps))
