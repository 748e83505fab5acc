"""Command-line front end: ``polybump <subcommand> [--config PATH] [--out DIR] ...``.

Each subcommand writes CSV/JSON artifacts plus ``report.json`` (inputs,
outputs, pass/fail summary) into the output directory. Wall-clock data goes
to ``metadata.json`` only, so two runs with one config give identical CSVs.

Exit codes: 0 all checks pass, 2 configuration error, 3 numerical failure or
failed check, 4 hypothesis of the existence statement violated.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import elliptic as el
from . import reduction as rd
from . import solver as sv
from .ansatz import build_ansatz, default_grid
from .balance import BalanceError, BalanceProblem, solve_balance, sweep_d
from .geometry import SectorField
from .interactions import UnderflowError, fit_asymptotics, predict_pair, predict_theta, sample_pair, sample_theta
from .io import write_csv, write_json
from .params import Config, ConfigError, config_to_dict, load_config, validate
from .radial import ShootingError, ground_state
from .shadow import compute_shadow

SUBCOMMANDS = ("ground-state", "shadow", "interactions", "balance", "corrections", "errors", "reduce",
               "solve", "verify-all")
BALANCE_EPS = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
B_WINDOW = tuple(float(x) for x in np.linspace(2.0, 4.0, 5))

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_HYPOTHESIS = 0, 2, 3, 4
NUMERICAL_ERRORS = (sv.NewtonError, sv.CollapseError, BalanceError, ShootingError, UnderflowError,
                    el.SingularOperatorError, el.StagnationError, ArithmeticError, np.linalg.LinAlgError)


@dataclass
class ReportBundle:
    run_id: str
    inputs: dict
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)  # check name -> {"passed", "detail"}

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.summary.values())

    def check(self, name: str, ok, detail: str = "") -> None:
        self.summary[name] = {"passed": bool(ok), "detail": detail}

    def to_json(self) -> dict:
        return {"run_id": self.run_id, "inputs": self.inputs, "outputs": self.outputs,
                "summary": self.summary, "passed": self.passed}


class Context:
    """Resolved configuration, output directory and the bundle being filled."""

    def __init__(self, cfg: Config, out: Path, args, bundle: ReportBundle):
        self.cfg, self.out, self.args, self.bundle = cfg, out, args, bundle

    @property
    def quick(self) -> bool:
        return bool(getattr(self.args, "quick", False))

    def csv(self, name: str, header, rows) -> Path:
        p = write_csv(self.out / name, header, rows)
        self.bundle.outputs.append(p.name)
        return p

    def json(self, name: str, obj) -> Path:
        p = write_json(self.out / name, obj)
        self.bundle.outputs.append(p.name)
        return p

    def map(self, fn, items):
        """Ordered map over a bounded thread pool (--jobs)."""
        items = list(items)
        jobs = self.cfg.run.jobs
        if jobs <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))

    def resolution(self) -> dict:
        r = self.cfg.run
        if self.quick:
            return {"h": max(r.h, 0.1), "n_theta": min(r.n_theta, 32)}
        return {"h": r.h, "n_theta": r.n_theta}


# --- shared pipeline pieces ---------------------------------------------------------------

def _construction(ctx: Context):
    cfg = ctx.cfg
    validate(cfg.system, cfg.V, cfg.W, construction=True)
    if cfg.system.dim < 2:
        raise ConfigError("the construction needs dim >= 2")
    sh = compute_shadow(cfg.system, cfg.V, cfg.W)
    U = ground_state(sh.omega0, cfg.system.mu2, cfg.system.dim)
    return sh, U


def _template(p, omega0: float, prefactors=(1.0, 1.0), eps: float = 1e-4) -> BalanceProblem:
    case = "alpha_zero" if p.alpha == 0 else "alpha_nonzero"
    return BalanceProblem(case, omega0, p.k, p.m, p.dim, tuple(prefactors), eps)


def _grid(ctx: Context, p, omega0: float, t: float):
    kw = ctx.resolution()
    if ctx.cfg.run.r_out is not None:
        kw["u_extent"] = ctx.cfg.run.r_out * p.epsilon  # r_out is in scaled units
    return default_grid(p, omega0, t, **kw)


def _ansatz_at_limit(ctx: Context, sh, U, eps: float):
    """Ansatz at rho = d eps |ln eps| with d the eps -> 0 limit of the balance."""
    p = ctx.cfg.system.with_(epsilon=eps)
    d = _template(p, sh.omega0).d_limit
    rho = d * eps * abs(math.log(eps))
    g = _grid(ctx, p, sh.omega0, rho / eps)
    return build_ansatz(p, sh, ctx.cfg.V, ctx.cfg.W, rho, g, U=U, tol=ctx.cfg.run.quad_tol)


def _calibration(ctx: Context, sh, U):
    p = ctx.cfg.system
    consts = rd.eval_constants(U, p.k)
    if p.alpha == 0:
        B = rd.fit_B1(U, p.k, B_WINDOW, p.dim)
    else:
        B = rd.fit_B2(U, p.k, p.m, p.alpha, B_WINDOW, p.dim)
    return consts, B


# --- subcommands ------------------------------------------------------------------------

def cmd_ground_state(ctx: Context) -> None:
    a = ctx.args
    dim = a.dim if a.dim is not None else ctx.cfg.system.dim
    mu = a.mu if a.mu is not None else ctx.cfg.system.mu2
    if not (a.omega > 0 and mu > 0) or dim not in (1, 2, 3):
        raise ConfigError("ground-state needs omega > 0, mu > 0 and dim in 1..3")
    U = ground_state(a.omega, mu, dim)
    r = np.linspace(0.0, 30.0 / math.sqrt(a.omega), 3001)
    ctx.csv("ground_state.csv", ["r", "U", "dU"], zip(r.tolist(), U(r).tolist(), U.derivative(r).tolist()))
    ctx.json("ground_state.json", U.to_json())
    if dim == 1:
        exact = math.sqrt(2 * a.omega / mu) / np.cosh(math.sqrt(a.omega) * r)
        err = float(np.max(np.abs(U(r) - exact)))
        ctx.bundle.check("sech closed form", err < 1e-8, f"sup error {err:.3e}")
    res = U.energy_identity_defect()
    ctx.bundle.check("energy identity", res < 1e-6, f"relative defect {res:.3e}")


def cmd_shadow(ctx: Context) -> None:
    cfg = ctx.cfg
    validate(cfg.system, cfg.V, cfg.W)
    sh = compute_shadow(cfg.system, cfg.V, cfg.W)
    ctx.csv("shadow.csv", ["r", "omega"], sh.table())
    ctx.json("shadow.json", {"omega0": sh.omega0, "lap_omega0": sh.lap_omega0,
                             "lap_omega0_fd": sh.lap_omega0_fd, "Y0": sh.Y.u0,
                             "classification": sh.classification.value})
    rel = abs(sh.lap_omega0 - sh.lap_omega0_fd) / max(abs(sh.lap_omega0), 1e-300)
    ctx.bundle.check("Delta omega(0): closed form vs finite difference", rel < 1e-4, f"relative gap {rel:.2e}")
    ctx.bundle.check("omega0 > 0", sh.omega0 > 0, f"omega0 = {sh.omega0:.6g}")


def cmd_interactions(ctx: Context) -> None:
    p = ctx.cfg.system
    sh = compute_shadow(p, ctx.cfg.V, ctx.cfg.W)
    U = ground_state(sh.omega0, p.mu2, p.dim)
    s = math.sqrt(sh.omega0)
    radii = np.geomspace(10.0 / s, 24.0 / s, 12)
    a = -(p.dim - 1) / 2
    pair = sample_pair(U, U, radii, p.dim)
    theta = sample_theta(U, 1.0, 2.0, radii, p.dim)
    ctx.csv("interactions.csv", ["R", "pair", "theta_1_2"],
            [(R, x, y) for (R, x), (_, y) in zip(pair, theta)])
    fits = {}
    for name, samples, pred in (("pair", pair, predict_pair(a, s, a, s, p.dim)),
                                ("theta_1_2", theta, predict_theta(1.0, 2.0, p.dim, sh.omega0))):
        f = fit_asymptotics(samples, pred)
        fits[name] = {"case": f.predicted_case, "rate": f.exp_rate, "predicted_rate": f.predicted_rate,
                      "power": f.poly_power, "predicted_power": f.predicted_power, "prefactor": f.prefactor}
        ctx.bundle.check(f"{name} rate", f.rate_deviation <= 0.02,
                         f"{f.exp_rate:.5f} vs {f.predicted_rate:.5f}")
    ctx.json("interactions.json", fits)


def cmd_balance(ctx: Context) -> None:
    p = ctx.cfg.system
    eps = ctx.args.eps_list or (BALANCE_EPS if ctx.args.sweep else (p.epsilon,))
    if ctx.args.calibrated:
        sh, U = _construction(ctx)
        consts, B = _calibration(ctx, sh, U)
        pred = rd.solve_reduced_d(p, sh, consts, B.prefactor)
        tpl = _template(p, sh.omega0, pred.prefactors)
    else:
        # unit-normalised problem: omega0 = 1, unit prefactors
        tpl = _template(p, 1.0)
    rows = []
    if len(eps) >= 2:
        sw = sweep_d(tpl, eps)
        sols = sw.solutions
        ctx.bundle.check("monotone approach to the limit", sw.monotone,
                         "gaps " + ", ".join(f"{abs(d - sw.d_limit):.4f}" for d in sw.d_eff))
        ctx.json("balance.json", {"d_limit": sw.d_limit, "best_model": sw.best_model, "rss": sw.rss,
                                  "case": tpl.case, "prefactors": list(tpl.prefactors)})
    else:
        sols = (solve_balance(replace(tpl, epsilon=eps[0])),)
    for s in sols:
        rows.append((s.epsilon, s.t, s.rho, s.d_eff, tpl.d_limit, s.d_eff / tpl.d_limit))
        ctx.bundle.check(f"root at eps={s.epsilon:g}", s.residual < 1e-10, f"|g| = {s.residual:.2e}")
    ctx.csv("balance.csv", ["eps", "t", "rho", "d_eff", "d_limit", "ratio"], rows)


def cmd_corrections(ctx: Context) -> None:
    sh, U = _construction(ctx)

    def one(e):
        a = _ansatz_at_limit(ctx, sh, U, e)
        psi = SectorField(a.grid, a.psi)
        gam, _ = el.fit_gamma(psi, a.peaks)
        C = el.tail_bound_constant(psi, a.peaks, min(gam, math.sqrt(sh.omega0)))
        return (e, a.rho, float(np.max(np.abs(a.phi))), float(np.max(np.abs(a.psi))), a.phi0, gam, C,
                a.deflation, a.extras["z_component"])

    rows = ctx.map(one, ctx.cfg.run.epsilon_sweep)
    ctx.csv("corrections.csv", ["eps", "rho", "phi_sup", "psi_sup", "phi_origin", "gamma", "tail_C",
                                "lambda", "z_component"], rows)
    zc = max(r[-1] for r in rows)
    ctx.bundle.check("Psi orthogonal to Z", zc < 1e-8, f"max relative |int Psi Z| {zc:.2e}")
    ok = all(0 < r[5] < math.sqrt(sh.omega0) for r in rows)
    ctx.bundle.check("gamma in (0, sqrt(omega0))", ok, ", ".join(f"{r[5]:.4f}" for r in rows))


def cmd_errors(ctx: Context) -> None:
    sh, U = _construction(ctx)

    def one(e):
        er = rd.eval_error_terms(_ansatz_at_limit(ctx, sh, U, e))
        return (e, er.rho, er.e1_l2, er.e2_l2, er.deflation_l2, er.m_terms["M1"], *er.ledger_defect)

    rows = ctx.map(one, ctx.cfg.run.epsilon_sweep)
    ctx.csv("errors.csv", ["eps", "rho", "E1", "E2", "deflation", "M1", "ledger_u", "ledger_v"], rows)
    if len(rows) >= 2:
        eps = [r[0] for r in rows]
        fits = {name: rd.exponent_fit(eps, [r[i] for r in rows])[0] for name, i in (("E1", 2), ("E2", 3))}
        ctx.json("errors.json", {"exponents": fits})
    led = max(max(r[-2:]) for r in rows)
    ctx.bundle.check("ledger completeness", led < 1e-10, f"max relative defect {led:.2e}")


def cmd_reduce(ctx: Context) -> None:
    sh, U = _construction(ctx)
    p = ctx.cfg.system
    consts, B = _calibration(ctx, sh, U)

    def one(e):
        pred = rd.solve_reduced_d(p.with_(epsilon=e), sh, consts, B.prefactor)
        # evaluate the projection at the predicted radius, on a grid built for it
        pe = p.with_(epsilon=e)
        g = _grid(ctx, pe, sh.omega0, pred.t)
        a = build_ansatz(pe, sh, ctx.cfg.V, ctx.cfg.W, pred.rho, g, U=U, tol=ctx.cfg.run.quad_tol)
        pr = rd.eval_projection(a, consts)
        return (e, pred.rho, pred.t, pred.d_eff, pred.d_limit, pr.f1_ratio, pr.f1_limit, pr.c_epsilon)

    rows = ctx.map(one, ctx.cfg.run.epsilon_sweep)
    ctx.csv("reduce.csv", ["eps", "rho", "t", "d_eff", "d_limit", "F1_ratio", "F1_limit", "c_eps"], rows)
    ctx.json("reduce.json", {"A": consts.A, "b_tilde": consts.b_tilde, "c_n": consts.c_n,
                             "B": B.prefactor, "B_name": B.name, "rate": B.rate,
                             "lap_omega0": sh.lap_omega0})
    dev = [abs(r[5] / r[6] - 1) for r in rows]
    ctx.bundle.check("F1 / (eps rho) approaches -Delta omega(0) A", len(dev) < 2 or dev[-1] < dev[0],
                     ", ".join(f"{100 * d:.1f}%" for d in dev))


def cmd_solve(ctx: Context) -> None:
    sh, U = _construction(ctx)
    p = ctx.cfg.system
    consts, B = _calibration(ctx, sh, U)
    r = ctx.cfg.run
    tr = sv.continue_in_epsilon(
        p, sh, ctx.cfg.V, ctx.cfg.W, r.epsilon_sweep,
        lambda e: rd.solve_reduced_d(p.with_(epsilon=e), sh, consts, B.prefactor).rho,
        lambda e, t: _grid(ctx, p.with_(epsilon=e), sh.omega0, t),
        U=U, tol=r.newton_tol)
    ctx.csv("solve.csv", ["eps", "residual", "newton_iters", "peak_radius", "d_eff", "phi_norm", "psi_norm"],
            tr.rows())
    ctx.bundle.check("continuation completed", tr.failure is None, tr.failure or f"{len(tr.steps)} solves")
    if tr.steps:
        worst = max(s.result.residual for s in tr.steps)
        ctx.bundle.check("residual below tolerance", worst < r.newton_tol, f"max {worst:.2e}")
        ctx.bundle.check("positive solution", all(s.result.positive for s in tr.steps), "nodal check")


def cmd_verify_all(ctx: Context) -> None:
    from .acceptance import run_all
    results = run_all(quick=ctx.quick, only=ctx.args.only, echo=print)
    ctx.csv("acceptance.csv", ["criterion", "title", "passed", "detail"],
            [(r.number, r.title, r.passed, r.line()) for r in results])
    ctx.json("acceptance.json", [r.summary() for r in results])
    for r in results:
        ctx.bundle.check(f"criterion {r.number}", r.passed, r.line())


COMMANDS = {"ground-state": cmd_ground_state, "shadow": cmd_shadow, "interactions": cmd_interactions,
            "balance": cmd_balance, "corrections": cmd_corrections, "errors": cmd_errors,
            "reduce": cmd_reduce, "solve": cmd_solve, "verify-all": cmd_verify_all}


# --- argument handling --------------------------------------------------------------------

def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML configuration file")
    common.add_argument("--out", type=Path, help="output directory (POLYBUMP_OUT overrides)")
    common.add_argument("--eps", dest="eps_list", type=_float_list, help="comma-separated decreasing eps values")
    common.add_argument("--quick", action="store_true", help="reduced resolution")
    common.add_argument("--jobs", type=int, help="worker threads for eps sweeps")
    ap = argparse.ArgumentParser(prog="polybump", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    gs = sub.add_parser("ground-state", parents=[common], help="radial ground state of -U'' + omega U = mu U^3")
    gs.add_argument("--omega", type=float, default=1.0)
    gs.add_argument("--mu", type=float)
    gs.add_argument("--dim", type=int)
    sub.add_parser("shadow", parents=[common], help="shadow potential omega = W - beta Y^2")
    sub.add_parser("interactions", parents=[common], help="interaction integrals and their decay fits")
    bal = sub.add_parser("balance", parents=[common], help="balance equation for the peak radius")
    bal.add_argument("--sweep", action="store_true", help="sweep eps from 1e-2 to 1e-6")
    bal.add_argument("--calibrated", action="store_true", help="prefactors from the configured system")
    sub.add_parser("corrections", parents=[common], help="correction terms Phi, Psi along the eps sweep")
    sub.add_parser("errors", parents=[common], help="error terms E1, E2 along the eps sweep")
    sub.add_parser("reduce", parents=[common], help="reduced equation and projection terms")
    sub.add_parser("solve", parents=[common], help="full Newton construction with continuation in eps")
    va = sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    va.add_argument("--only", type=lambda s: tuple(int(x) for x in s.split(",")), help="criteria to run")
    return ap


def resolve_config(args) -> Config:
    cfg = load_config(args.config) if args.config else Config()
    run = cfg.run
    if args.eps_list:
        run = replace(run, epsilon_sweep=args.eps_list)
    if args.jobs is not None:
        run = replace(run, jobs=args.jobs)
    return replace(cfg, run=run)


def run_id(command: str, inputs: dict) -> str:
    blob = json.dumps({"command": command, "inputs": inputs}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def run(command: str, args) -> ReportBundle:
    """Execute one subcommand; exceptions propagate to :func:`main`."""
    cfg = resolve_config(args)
    out = Path(os.environ.get("POLYBUMP_OUT") or args.out or cfg.run.output_dir)
    flags = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items())
             if k not in ("command", "config", "out", "func") and not isinstance(v, Path)}
    inputs = {"config": config_to_dict(cfg), "flags": flags}
    bundle = ReportBundle(run_id(command, inputs), inputs)
    ctx = Context(cfg, out, args, bundle)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    COMMANDS[command](ctx)
    write_json(out / "metadata.json", {"run_id": bundle.run_id, "command": command,
                                      "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                                      "elapsed_s": time.perf_counter() - t0, "version": __version__,
                                      "python": platform.python_version(), "numpy": np.__version__})
    bundle.outputs.append("metadata.json")
    write_json(out / "report.json", bundle.to_json())
    return bundle


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse: usage errors and --help
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        bundle = run(args.command, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except rd.HypothesisError as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name, c in bundle.summary.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}: {c['detail']}")
    return EXIT_OK if bundle.passed else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
