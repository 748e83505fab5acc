"""System parameters, radial potentials and run configuration.

Everything here is immutable. A full configuration can be written to and read
back from a TOML document with sections ``[system]``, ``[potential.V]``,
``[potential.W]`` and ``[run]``; unknown keys are rejected.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w


class ConfigError(ValueError):
    """Invalid parameters or configuration file."""


POTENTIAL_KINDS = ("constant", "gaussian-bump", "polynomial-radial", "tabulated-radial")


@dataclass(frozen=True)
class SystemParams:
    mu1: float = 1.0
    mu2: float = 1.0
    beta: float = -1.0
    alpha: float = 0.0
    m: int = 1
    k: int = 2
    dim: int = 2
    epsilon: float = 0.05
    # m >= 2 with alpha = 0 is only accepted when explicitly requested
    allow_alpha_zero: bool = False

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class PotentialSpec:
    """Radial potential ``V(|y|)`` drawn from a small family of closed forms.

    kinds and parameters:
      constant           (c,)                    V = c
      gaussian-bump      (base, amp, width)      V = base + amp*exp(-r^2/width^2)
      polynomial-radial  (c0, c1, ..., cn)       V = sum c_i r^(2i)
      tabulated-radial   (r0, v0, r1, v1, ...)   cubic spline in r^2, constant past the last node
    """

    kind: str = "constant"
    parameters: tuple[float, ...] = (1.0,)
    floor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(float(p) for p in self.parameters))
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        n = len(self.parameters)
        need = {"constant": n == 1, "gaussian-bump": n == 3,
                "polynomial-radial": n >= 1, "tabulated-radial": n >= 6 and n % 2 == 0}
        if not need[self.kind]:
            raise ConfigError(f"wrong number of parameters ({n}) for {self.kind}")
        if self.kind == "gaussian-bump" and self.parameters[2] <= 0:
            raise ConfigError("gaussian-bump width must be positive")
        if self.kind == "tabulated-radial":
            r = np.asarray(self.parameters[0::2])
            if r[0] != 0.0 or np.any(np.diff(r) <= 0):
                raise ConfigError("tabulated radii must start at 0 and increase strictly")

    def _spline(self):
        r = np.asarray(self.parameters[0::2])
        v = np.asarray(self.parameters[1::2])
        return CubicSpline(r**2, v, bc_type="natural"), r[-1] ** 2, v[-1]

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        p = self.parameters
        if self.kind == "constant":
            return np.full_like(r, p[0])
        if self.kind == "gaussian-bump":
            return p[0] + p[1] * np.exp(-(r / p[2]) ** 2)
        if self.kind == "polynomial-radial":
            return np.polynomial.polynomial.polyval(r**2, p)
        spl, s_end, v_end = self._spline()
        s = r**2
        return np.where(s <= s_end, spl(np.minimum(s, s_end)), v_end)

    def second_derivative_at_zero(self) -> float:
        """d^2V/dr^2 at r = 0 (each Cartesian second derivative at the origin)."""
        p = self.parameters
        if self.kind == "constant":
            return 0.0
        if self.kind == "gaussian-bump":
            return -2.0 * p[1] / p[2] ** 2
        if self.kind == "polynomial-radial":
            return 2.0 * p[1] if len(p) > 1 else 0.0
        spl, _, _ = self._spline()
        return 2.0 * float(spl(0.0, 1))

    def laplacian_at_zero(self, dim: int) -> float:
        return dim * self.second_derivative_at_zero()

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def far_value(self, r_far: float) -> float:
        """Value used for the exponential tail rate beyond ``r_far``."""
        return float(self(r_far))


@dataclass(frozen=True)
class RunConfig:
    epsilon_sweep: tuple[float, ...] = (0.1, 0.08, 0.06, 0.04, 0.02)
    # construction grid: radial spacing near the peaks, angular cells in the
    # sector, outer radius in scaled units (None: rho/eps + 30/sqrt(omega0))
    h: float = 0.05
    n_theta: int = 64
    r_out: float | None = None
    newton_tol: float = 1e-10
    quad_tol: float = 1e-10
    fit_tol: float = 1e-2
    newton_max_iter: int = 50
    newton_min_step: float = 2.0**-20
    continuation_factor: float = 0.8
    output_dir: str = "out"
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "epsilon_sweep", tuple(float(e) for e in self.epsilon_sweep))
        sweep = self.epsilon_sweep
        if any(e <= 0 for e in sweep) or any(b >= a for a, b in zip(sweep, sweep[1:])):
            raise ConfigError("epsilon_sweep must be positive and strictly decreasing")
        for name in ("h", "newton_tol", "quad_tol", "fit_tol", "newton_min_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_theta < 2 or self.newton_max_iter < 1 or self.jobs < 1:
            raise ConfigError("n_theta >= 2, newton_max_iter >= 1 and jobs >= 1 required")
        if not 0 < self.continuation_factor < 1:
            raise ConfigError("continuation_factor must lie in (0, 1)")

    @property
    def tolerances(self) -> dict[str, float]:
        return {"newton_tol": self.newton_tol, "quad_tol": self.quad_tol, "fit_tol": self.fit_tol}


@dataclass(frozen=True)
class Config:
    system: SystemParams = field(default_factory=SystemParams)
    V: PotentialSpec = field(default_factory=PotentialSpec)
    W: PotentialSpec = field(default_factory=PotentialSpec)
    run: RunConfig = field(default_factory=RunConfig)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool | None  # None: deferred to another module
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _potential_checks(name: str, spec: PotentialSpec) -> list[Check]:
    if not spec.floor > 0:
        raise ConfigError(f"{name}: floor must be positive")
    r = np.linspace(0.0, 60.0, 6001)
    vmin = float(np.min(spec(r)))
    ok = vmin >= spec.floor * (1 - 1e-12)
    return [Check(f"{name}.floor", ok, f"sampled min {vmin:.6g} vs floor {spec.floor:.6g}")]


def validate(params: SystemParams, V: PotentialSpec, W: PotentialSpec,
             construction: bool = False) -> ValidationReport:
    """Check the standing assumptions. Structural violations raise ConfigError.

    ``construction=True`` additionally requires beta < 0.
    """
    p = params
    if p.dim not in (1, 2, 3):
        raise ConfigError("dim must be 1, 2 or 3")
    if p.k < 2 or p.k % 2:
        raise ConfigError("k must be even")
    if p.m < 1:
        raise ConfigError("m must be >= 1")
    if p.m == 1 and p.alpha != 0:
        raise ConfigError("m = 1 forces alpha = 0")
    if p.m >= 2 and p.alpha == 0 and not p.allow_alpha_zero:
        raise ConfigError("m >= 2 requires alpha != 0 or an explicit alpha = 0 override")
    if not (p.mu1 > 0 and p.mu2 > 0):
        raise ConfigError("mu1 and mu2 must be positive")
    if not p.epsilon > 0:
        raise ConfigError("epsilon must be positive")
    if construction and not p.beta < 0:
        raise ConfigError("a construction run requires beta < 0")
    checks = [
        Check("k.even", True, f"k = {p.k}"),
        Check("m.alpha", True, f"m = {p.m}, alpha = {p.alpha}"),
        Check("beta.negative", p.beta < 0, f"beta = {p.beta}"),
        Check("dim.construction", p.dim >= 2, "dim = 1 is limited to radial and interaction work"),
    ]
    checks += _potential_checks("V", V) + _potential_checks("W", W)
    checks.append(Check("Y.nondegenerate", None, "deferred to elliptic.check_nondegeneracy"))
    return ValidationReport(tuple(checks))


# --- config files -------------------------------------------------------------

def _section(cls, data: dict, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"[{where}]: {exc}") from None


def config_from_dict(data: dict) -> Config:
    unknown = set(data) - {"system", "potential", "run"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    pots = data.get("potential", {})
    if set(pots) - {"V", "W"}:
        raise ConfigError(f"unknown potential sections: {sorted(set(pots) - {'V', 'W'})}")
    system = _section(SystemParams, data.get("system", {}), "system")
    V = _section(PotentialSpec, pots.get("V", {}), "potential.V")
    W = _section(PotentialSpec, pots.get("W", {}), "potential.W")
    run = _section(RunConfig, data.get("run", {}), "run")
    return Config(system, V, W, run)


def config_to_dict(cfg: Config) -> dict:
    run = asdict(cfg.run)
    if run["r_out"] is None:
        del run["r_out"]
    pot = lambda s: {"kind": s.kind, "parameters": list(s.parameters), "floor": s.floor}
    return {"system": asdict(cfg.system), "potential": {"V": pot(cfg.V), "W": pot(cfg.W)},
            "run": {k: list(v) if isinstance(v, tuple) else v for k, v in run.items()}}


def load_config(path: str | Path) -> Config:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data)


def dump_config(cfg: Config) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def save_config(cfg: Config, path: str | Path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")


def sphere_area(dim: int) -> float:
    """|S^{dim-1}|; for dim = 1 this is the two-point 'sphere', area 2."""
    return 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)
