"""The first-equation ground state Y and the shadow potential omega = W - beta Y^2."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .params import PotentialSpec, SystemParams
from .radial import RadialProfile, ground_state, solve_radial_state

# for a smooth radial f, each d^2 f / dx_i^2 at the origin equals (Delta f)(0) / N
def c_n(dim: int) -> float:
    return 1.0 / dim


class Verdict(str, Enum):
    THEOREM1 = "theorem1-admissible"
    ATTRACTIVE = "attractive-branch"  # alpha > 0 required
    REPULSIVE = "repulsive-branch"  # alpha < 0 required
    THEOREM2 = "theorem2-admissible"
    INADMISSIBLE = "inadmissible"
    DEGENERATE = "degenerate"


@dataclass(frozen=True, eq=False)
class ShadowPotential:
    Y: RadialProfile
    W: PotentialSpec
    beta: float
    dim: int
    omega0: float
    lap_omega0: float  # from Delta W(0) - 2 beta Y(0) Delta Y(0)
    lap_omega0_fd: float  # N times a five-point radial second difference
    classification: Verdict

    def __call__(self, r):
        """omega(|y|)."""
        r = np.asarray(r, dtype=float)
        return self.W(r) - self.beta * self.Y(r) ** 2

    def second_derivative_at_zero(self) -> float:
        return self.lap_omega0 / self.dim

    def table(self, r_max: float = 10.0, n: int = 501):
        r = np.linspace(0.0, r_max, n)
        return zip(r.tolist(), self(r).tolist())


def laplacian_fd(f, dim: int, h: float) -> float:
    """N * f''(0) for a radial f from the even five-point stencil."""
    v0, v1, v2 = (float(f(np.array([x]))[0]) for x in (0.0, h, 2 * h))
    return dim * (-2 * v2 + 32 * v1 - 30 * v0) / (12 * h * h)


def solve_Y(params: SystemParams, V: PotentialSpec) -> RadialProfile:
    if V.is_constant:
        return ground_state(V.parameters[0], params.mu1, params.dim)
    far = V.far_value(40.0)
    return solve_radial_state(V, params.mu1, params.dim, far, r_max=40.0 / math.sqrt(far))


def compute_shadow(params: SystemParams, V: PotentialSpec, W: PotentialSpec,
                   fd_step: float = 1e-2) -> ShadowPotential:
    Y = solve_Y(params, V)
    beta, N = params.beta, params.dim
    y0 = Y.u0
    omega0 = float(W(0.0)) - beta * y0**2
    lapY0 = float(V(0.0)) * y0 - params.mu1 * y0**3  # -Delta Y + V Y = mu1 Y^3 at 0
    lap = W.laplacian_at_zero(N) - 2 * beta * y0 * lapY0
    sh = ShadowPotential(Y, W, beta, N, omega0, lap, 0.0, Verdict.INADMISSIBLE)
    fd = laplacian_fd(sh, N, fd_step)
    cls = _branch(omega0, lap, params.alpha)
    return ShadowPotential(Y, W, beta, N, omega0, lap, fd, cls)


def _branch(omega0, lap, alpha, tol=1e-10) -> Verdict:
    if not omega0 > 0 or abs(lap) <= tol:
        return Verdict.INADMISSIBLE
    if alpha == 0:
        return Verdict.THEOREM1 if lap < 0 else Verdict.INADMISSIBLE
    return Verdict.ATTRACTIVE if lap < 0 else Verdict.REPULSIVE


def classify(shadow: ShadowPotential, alpha: float, tol: float = 1e-10) -> Verdict:
    """Which existence statement applies: Delta omega(0) < 0 for alpha = 0,
    alpha * Delta omega(0) < 0 otherwise."""
    lap = shadow.lap_omega0
    if abs(lap) <= tol * max(1.0, abs(shadow.omega0)):
        return Verdict.DEGENERATE
    if not shadow.omega0 > 0:
        return Verdict.INADMISSIBLE
    if alpha == 0:
        return Verdict.THEOREM1 if lap < 0 else Verdict.INADMISSIBLE
    return Verdict.THEOREM2 if alpha * lap < 0 else Verdict.INADMISSIBLE
