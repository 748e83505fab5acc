"""Balance equations for the scaled peak radius t = rho / epsilon.

With rho = epsilon t the balance between the potential drift (size
epsilon rho) and the bump interaction reads, in log form,

    g(t) = ln(lhs * eps^2 * t) - ln(rhs) + rate * t + power * ln t [- ln ln t] = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .fitting import lstsq


class BalanceError(RuntimeError):
    pass


@dataclass(frozen=True)
class BalanceProblem:
    case: str  # "alpha_zero" or "alpha_nonzero"
    omega0: float
    k: int
    m: int = 1
    dim: int = 2
    prefactors: tuple[float, float] = (1.0, 1.0)
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.case not in ("alpha_zero", "alpha_nonzero"):
            raise ValueError("case must be alpha_zero or alpha_nonzero")
        if not (self.omega0 > 0 and all(c > 0 for c in self.prefactors)):
            raise ValueError("omega0 and prefactors must be positive")
        if self.case == "alpha_nonzero" and self.dim not in (2, 3):
            raise ValueError("the alpha != 0 balance is stated for dim 2 and 3")

    @property
    def rate(self) -> float:
        s = math.sqrt(self.omega0)
        if self.case == "alpha_zero":
            return 2 * s * math.sin(math.pi / self.k)
        return 4 * s * math.sin(math.pi / (self.m * self.k))

    @property
    def power(self) -> float:
        if self.case == "alpha_zero":
            return (self.dim - 1) / 2
        return 0.5 if self.dim == 2 else 2.0

    @property
    def loglog(self) -> bool:
        return self.case == "alpha_nonzero" and self.dim == 3

    @property
    def d_limit(self) -> float:
        """Limit of rho / (eps |ln eps|) as eps -> 0."""
        return 2.0 / self.rate

    def g(self, t) -> float:
        lhs, rhs = self.prefactors
        out = (math.log(lhs) + 2 * math.log(self.epsilon) + np.log(t) - math.log(rhs)
               + self.rate * t + self.power * np.log(t))
        if self.loglog:
            out = out - np.log(np.log(t))
        return out

    def dg(self, t) -> float:
        out = (1 + self.power) / t + self.rate
        if self.loglog:
            out = out - 1 / (t * np.log(t))
        return out


@dataclass(frozen=True)
class BalanceSolution:
    rho: float
    t: float
    d_eff: float
    iterations: int
    residual: float
    epsilon: float


def _bracket(p: BalanceProblem) -> tuple[float, float]:
    L = abs(math.log(p.epsilon))
    if L <= 2:
        raise BalanceError("need |ln eps| > 2")
    lo, hi = 1.0 + 1e-9, 10 * L
    if p.loglog:
        # g blows up at t = 1+; the physical root lies past the minimum of g
        res = minimize_scalar(p.g, bounds=(1.0 + 1e-9, hi), method="bounded",
                              options={"xatol": 1e-12})
        lo = float(res.x)
    if not (p.g(lo) < 0 < p.g(hi)):
        raise BalanceError(f"no root in t in ({lo:.4g}, {hi:.4g}): g = ({p.g(lo):.3g}, {p.g(hi):.3g})")
    return lo, hi


def solve_balance(p: BalanceProblem, tol: float = 1e-12, max_iter: int = 100) -> BalanceSolution:
    """Safeguarded Newton on g(t) = 0."""
    a, b = _bracket(p)
    t = 0.5 * (a + b)
    for it in range(1, max_iter + 1):
        gt = float(p.g(t))
        if abs(gt) < tol:
            break
        if gt < 0:
            a = t
        else:
            b = t
        step = t - gt / float(p.dg(t))
        t = step if a < step < b else 0.5 * (a + b)
    else:
        raise BalanceError("Newton did not converge")
    L = abs(math.log(p.epsilon))
    return BalanceSolution(p.epsilon * t, t, t / L, it, abs(float(p.g(t))), p.epsilon)


def bisect_balance(p: BalanceProblem, tol: float = 1e-13) -> float:
    """Plain bisection on g, kept as an independent check of solve_balance."""
    a, b = _bracket(p)
    while b - a > tol * b:
        c = 0.5 * (a + b)
        if p.g(c) < 0:
            a = c
        else:
            b = c
    return 0.5 * (a + b)


@dataclass(frozen=True)
class SweepResult:
    solutions: tuple[BalanceSolution, ...]
    d_limit: float
    best_model: str  # "inv_log" or "loglog_over_log"
    rss: dict

    @property
    def d_eff(self) -> np.ndarray:
        return np.array([s.d_eff for s in self.solutions])

    @property
    def monotone(self) -> bool:
        gap = np.abs(self.d_eff - self.d_limit)
        return bool(np.all(np.diff(gap) < 0))


def sweep_d(template: BalanceProblem, epsilons) -> SweepResult:
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be strictly decreasing")
    sols = tuple(solve_balance(replace(template, epsilon=e)) for e in eps)
    L = np.abs(np.log(eps))
    gap = np.array([s.d_eff for s in sols]) - template.d_limit
    rss = {}
    for name, x in (("inv_log", 1 / L), ("loglog_over_log", np.log(L) / L)):
        rss[name] = lstsq([x], gap).rss if len(eps) >= 2 else float("nan")
    best = min(rss, key=rss.get)
    return SweepResult(sols, template.d_limit, best, rss)


def dominance_holds(k: int, m: int) -> bool:
    """sin(pi/k) > 2 sin(pi/(m k)): the condition under which the alpha term
    outruns the in-ring interaction."""
    return math.sin(math.pi / k) - 2 * math.sin(math.pi / (m * k)) > 1e-12
