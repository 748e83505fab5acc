"""Interaction integrals between translated radial profiles and their asymptotics.

Both integrals are axially symmetric about the offset direction, so they are
computed in cylindrical coordinates (z along xi, rho across) with
Gauss-Legendre panels; the z panels cover the two centres and the segment
between them, which is where the integrand lives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fitting import lstsq


class UnderflowError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SyntheticProfile:
    """(1 + r^2)^(a/2) exp(-b sqrt(1 + r^2)): smooth, and ~ r^a e^{-b r} at infinity."""

    a: float
    b: float

    @property
    def decay_rate(self) -> float:
        return self.b

    @property
    def decay_power(self) -> float:
        return -self.a

    def __call__(self, r):
        s = np.sqrt(1.0 + np.asarray(r, dtype=float) ** 2)
        return s**self.a * np.exp(-self.b * s)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        s = np.sqrt(1.0 + r**2)
        return (self.a / s - self.b) * (r / s) * s**self.a * np.exp(-self.b * s)


@dataclass(frozen=True)
class InteractionQuery:
    u: object
    v: object
    xi: tuple[float, ...]
    kind: str = "plain"  # or "theta"
    s: float = 1.0
    t: float = 1.0
    dim: int | None = None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.xi))


def _gl(a, b, width, n=16):
    """Composite Gauss-Legendre nodes/weights on [a, b] with panels of about ``width``."""
    npan = max(1, int(math.ceil((b - a) / width)))
    x0, w0 = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, npan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x0).ravel(), (half[:, None] * w0).ravel()


def _rho_nodes(L, scale, n=16):
    edges = [0.0]
    w = 0.25 * scale
    while edges[-1] < L:
        edges.append(min(edges[-1] + w, L))
        w *= 1.3
    x0, w0 = np.polynomial.legendre.leggauss(n)
    e = np.asarray(edges)
    half = 0.5 * np.diff(e)
    mid = 0.5 * (e[1:] + e[:-1])
    return (mid[:, None] + half[:, None] * x0).ravel(), (half[:, None] * w0).ravel()


def _axial_integral(f, R, dim, rate, refine=1):
    """Integral over R^dim of f(z, rho, |x|, |x + R e1|) with axial symmetry about e1."""
    L = 25.0 / rate
    width = 0.5 / rate / refine
    z, wz = _gl(-R - L, L, width)
    if dim == 1:
        rx, rxi = np.abs(z), np.abs(z + R)
        return float(np.sum(wz * f(z, 0.0, rx, rxi)))
    rho, wr = _rho_nodes(L, 1.0 / rate / refine)
    measure = 2.0 * np.ones_like(rho) if dim == 2 else 2 * math.pi * rho
    total = 0.0
    # chunk over z to bound memory
    for sl in np.array_split(np.arange(len(z)), max(1, len(z) // 256)):
        Z = z[sl][:, None]
        rx = np.sqrt(Z**2 + rho**2)
        rxi = np.sqrt((Z + R) ** 2 + rho**2)
        total += float(np.sum(wz[sl][:, None] * (wr * measure) * f(Z, rho, rx, rxi)))
    return total


def _dim_of(q: InteractionQuery) -> int:
    if q.dim is not None:
        return q.dim
    for p in (q.u, q.v):
        if hasattr(p, "dim"):
            return p.dim
    raise ValueError("dimension not given")


def pair_integral(q: InteractionQuery, refine: int = 1) -> float:
    """int u(x + xi) v(x) dx for radial u, v."""
    dim, R = _dim_of(q), q.norm
    rate = min(q.u.decay_rate, q.v.decay_rate)
    val = _axial_integral(lambda z, rho, rx, rxi: q.u(rxi) * q.v(rx), R, dim, rate, refine)
    if val == 0.0 or not math.isfinite(val):
        raise UnderflowError(f"integrand underflows at |xi| = {R}; largest usable |xi| is about {700 / rate:.0f}")
    return val


def theta_integral(q: InteractionQuery, refine: int = 1) -> float:
    """Theta_{s,t}(xi) = int U^s(x + xi) d/dx1 U^t(x) dx.

    The integral is a vector f(|xi|) xi/|xi| contracted with e1, so it is
    computed once along the offset axis and multiplied by xi1/|xi|; this makes
    the antisymmetry in xi1 exact.
    """
    dim, R = _dim_of(q), q.norm
    if R == 0.0 or q.xi[0] == 0.0:
        return 0.0
    U, s, t = q.u, q.s, q.t
    if not (s >= 1 and t >= 1):
        raise ValueError("s, t >= 1 required")
    rate = s * U.decay_rate

    def f(z, rho, rx, rxi):
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(rx > 0, z / np.where(rx > 0, rx, 1.0), 0.0)
        return U(rxi) ** s * t * U(rx) ** (t - 1) * U.derivative(rx) * cos

    val = _axial_integral(f, R, dim, rate, refine)
    if val == 0.0 or not math.isfinite(val):
        raise UnderflowError(f"integrand underflows at |xi| = {R}")
    return val * q.xi[0] / R


def with_error(fn, q: InteractionQuery) -> tuple[float, float]:
    """Value and a resolution-doubling error estimate."""
    a, b = fn(q), fn(q, refine=2)
    return b, abs(a - b)


# --- asymptotic laws ------------------------------------------------------------

@dataclass(frozen=True)
class LemmaPrediction:
    case: str
    rate: float
    power: float
    log: bool = False


def predict_pair(a: float, b: float, a2: float, b2: float, dim: int) -> LemmaPrediction:
    """Asymptotics of int u_xi v for u ~ r^a e^{-b r}, v ~ r^a2 e^{-b2 r}."""
    if b > b2:
        a, b, a2, b2 = a2, b2, a, b
    if b < b2:
        return LemmaPrediction("A1-i", b, a)
    if a < a2:
        a, a2 = a2, a
    crit = -(dim + 1) / 2
    if a2 > crit:
        return LemmaPrediction("A1-ii-sum", b, a + a2 + (dim + 1) / 2)
    if a2 == crit:
        return LemmaPrediction("A1-ii-log", b, a, log=True)
    return LemmaPrediction("A1-ii-dominant", b, a)


def predict_theta(s: float, t: float, dim: int, lam: float = 1.0) -> LemmaPrediction:
    """Asymptotics of Theta_{s,t} for s <= t."""
    if s > t:
        raise ValueError("the law is stated for s <= t")
    rate = s * math.sqrt(lam)
    if s < t:
        return LemmaPrediction("A2-i", rate, -s * (dim - 1) / 2)
    if dim == 1 or s < (dim + 1) / (dim - 1):
        return LemmaPrediction("A2-ii-sum", rate, -s * (dim - 1) + (dim + 1) / 2)
    if s == (dim + 1) / (dim - 1):
        return LemmaPrediction("A2-ii-log", rate, -s * (dim - 1) / 2, log=True)
    return LemmaPrediction("A2-ii-dominant", rate, -s * (dim - 1) / 2)


@dataclass(frozen=True)
class AsymptoticFit:
    exp_rate: float
    poly_power: float
    prefactor: float
    window: tuple[float, float]
    r2: float
    predicted_case: str
    predicted_rate: float
    predicted_power: float
    rate_deviation: float  # relative
    power_deviation: float  # absolute
    aic_log: float
    aic_power: float

    @property
    def log_preferred(self) -> bool:
        return self.aic_log < self.aic_power


def fit_asymptotics(samples, prediction: LemmaPrediction, correction: bool = True) -> AsymptoticFit:
    """Fit log|value| = c - rate R + power log R [+ log log R] [+ q / R].

    The q/R column absorbs the leading 1/|xi| correction, which is what an
    extrapolation of windowed fits in 1/|xi| would remove. For log cases the
    log log R term is included with unit coefficient; the log and the
    pure power models are always both scored by AIC.
    """
    samples = sorted((float(r), float(v)) for r, v in samples)
    if len(samples) < 6:
        raise ValueError("at least 6 samples needed")
    R = np.array([s[0] for s in samples])
    V = np.array([s[1] for s in samples])
    if np.any(V == 0) or np.any(np.diff(np.abs(V)) >= 0):
        raise ValueError("|values| not strictly decreasing; fit rejected")
    y = np.log(np.abs(V))
    one, lr = np.ones_like(R), np.log(R)
    extra = [1.0 / R] if correction else []
    pure = lstsq([one, -R, lr] + extra, y)
    logm = lstsq([one, -R, lr] + extra, y - np.log(np.log(R)))
    fit = logm if prediction.log else pure
    c, rate, power = fit.coef[:3]
    return AsymptoticFit(
        exp_rate=float(rate), poly_power=float(power), prefactor=float(np.exp(c)),
        window=(float(R[0]), float(R[-1])), r2=fit.r2, predicted_case=prediction.case,
        predicted_rate=prediction.rate, predicted_power=prediction.power,
        rate_deviation=abs(rate / prediction.rate - 1), power_deviation=abs(power - prediction.power),
        aic_log=logm.aic, aic_power=pure.aic)


def sample_pair(u, v, radii, dim) -> list[tuple[float, float]]:
    return [(R, pair_integral(InteractionQuery(u, v, (R,) + (0.0,) * (dim - 1), dim=dim))) for R in radii]


def sample_theta(U, s, t, radii, dim) -> list[tuple[float, float]]:
    return [(R, theta_integral(InteractionQuery(U, U, (R,) + (0.0,) * (dim - 1), "theta", s, t, dim)))
            for R in radii]
