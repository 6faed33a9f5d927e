#!/usr/bin/env python3
"""
Rod Stability Toolkit
=====================
Kirchhoff rods with intrinsic curvature from a two-layer prestrain: limit
coefficients, critical force of the straight rod, flat helices and their
conjugate-point stability.

Usage:
  python3 stability.py coeffs                          # coefficients at the default strip
  python3 stability.py coeffs --wz 0.45 --chi 10
  python3 stability.py critical-force --bc clamped-clamped --numeric 400
  python3 stability.py helix --force-frac 0.999 --curve helix.csv
  python3 stability.py scan --wz 0.6 --output scan.json              # also writes scan.csv
  python3 stability.py sweep --wz-grid 0.45,0.6 --chi-grid 6,10 --frac-grid 0.5,0.999 --jobs 4 \\
      --output sweep.csv
  python3 stability.py minimize --bc clamped --force 0 --init random --seed 1 \\
      --output curve.csv --trace trace.csv

Exit codes: 0 ok, 2 invalid input, 3 construction failure, 4 no convergence.
Set RODSTAB_LOG=error|info|debug (or put it in .env) to control logging.
"""

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from dotenv import load_dotenv

from config import (
    DEFAULT_BC, DEFAULT_CHI, DEFAULT_DELTA, DEFAULT_FORCE_FRACTION, DEFAULT_LAME_LAMBDA,
    DEFAULT_LAME_MU, DEFAULT_LENGTH, DEFAULT_N_CURVE, DEFAULT_N_GRID, DEFAULT_N_SAMPLES,
    DEFAULT_NORMALIZE_BY_MU, DEFAULT_SWEEP_CHI, DEFAULT_SWEEP_FRAC, DEFAULT_SWEEP_WZ,
    DEFAULT_WZ, DELTA_RANGE, EXIT_CONSTRUCTION, EXIT_NO_CONVERGENCE,
    EXIT_OK, EXIT_VALIDATION, MIN_N_GRID, MIN_N_SAMPLES, MINIMIZE_MAX_ITER, MINIMIZE_TOL,
)
from rodstab import conjugate, critical_force, energy, helix, reports
from rodstab.coefficients import CrossSection, MaterialParams, build_coefficients
from rodstab.errors import (
    BracketFailure, ConfigError, DegenerateAxis, DegenerateCase, NoConvergence, NoRealRoot,
    RootNotBracketed, ZeroForce,
)
from rodstab.log import report_failure, setup_logging

logger = logging.getLogger("stability")

CONSTRUCTION_ERRORS = (NoRealRoot, ZeroForce, DegenerateAxis, DegenerateCase)
NUMERIC_ERRORS = (BracketFailure, RootNotBracketed)
FRACTION_BCS = ("clamped-clamped", "weak-clamped")
CRITICAL_FORCE_COMMANDS = ("critical-force",)
INIT_CHOICES = ("straight", "curved", "random")


@dataclass
class RunConfig:
    lame_lambda: float = DEFAULT_LAME_LAMBDA
    lame_mu: float = DEFAULT_LAME_MU
    normalize_by_mu: bool = DEFAULT_NORMALIZE_BY_MU
    length_L: float = DEFAULT_LENGTH
    w_z: float = DEFAULT_WZ
    chi: float = DEFAULT_CHI
    force: Optional[float] = None
    force_frac: Optional[float] = DEFAULT_FORCE_FRACTION
    delta: float = DEFAULT_DELTA
    bc_tag: str = DEFAULT_BC
    n_grid: int = DEFAULT_N_GRID
    n_samples: int = DEFAULT_N_SAMPLES
    seed: int = 0
    output_path: Optional[str] = None
    format: str = "json"
    jobs: int = 1
    wz_grid: list = field(default_factory=list)
    chi_grid: list = field(default_factory=list)
    frac_grid: list = field(default_factory=list)

    @property
    def force_mode(self):
        return "absolute" if self.force is not None else "fraction"

    def validate(self, command=None):
        numbers = {
            "lambda": self.lame_lambda, "mu": self.lame_mu, "length": self.length_L,
            "wz": self.w_z, "chi": self.chi, "delta": self.delta,
        }
        if self.force is not None:
            numbers["force"] = self.force
        if self.force_frac is not None:
            numbers["force-frac"] = self.force_frac
        for name, value in numbers.items():
            if not math.isfinite(value):
                raise ConfigError(f"--{name} must be finite, got {value}")
        if self.lame_mu <= 0:
            raise ConfigError(f"--mu must be positive, got {self.lame_mu}")
        if self.lame_lambda < 0:
            raise ConfigError(f"--lambda must be non-negative, got {self.lame_lambda}")
        if self.length_L <= 0:
            raise ConfigError(f"--length must be positive, got {self.length_L}")
        if self.w_z <= 0:
            raise ConfigError(f"--wz must be positive, got {self.w_z}")
        if self.chi < 0:
            raise ConfigError(f"--chi must be non-negative, got {self.chi}")
        lo, hi = DELTA_RANGE
        if not lo <= self.delta <= hi:
            raise ConfigError(f"--delta must lie in [{lo:g}, {hi:g}], got {self.delta}")
        if self.bc_tag not in energy.BC_TAGS:
            raise ConfigError(f"--bc must be one of {', '.join(energy.BC_TAGS)}, got {self.bc_tag!r}")
        if self.force is None and self.force_frac is None:
            raise ConfigError("either --force or --force-frac is required")
        if self.force_mode == "fraction" and self.bc_tag not in FRACTION_BCS:
            raise ConfigError(
                f"--force-frac needs --bc clamped-clamped or weak-clamped, got {self.bc_tag}")
        if command in CRITICAL_FORCE_COMMANDS and self.n_grid < MIN_N_GRID:
            raise ConfigError(f"--n-grid must be >= {MIN_N_GRID}, got {self.n_grid}")
        if self.n_grid < 8:
            raise ConfigError(f"--n-grid must be >= 8, got {self.n_grid}")
        if self.n_samples < MIN_N_SAMPLES:
            raise ConfigError(f"--n-samples must be >= {MIN_N_SAMPLES}, got {self.n_samples}")
        if self.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {self.jobs}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"--format must be csv or json, got {self.format!r}")
        for name, grid in (("wz-grid", self.wz_grid), ("chi-grid", self.chi_grid),
                           ("frac-grid", self.frac_grid)):
            if any(not math.isfinite(v) for v in grid):
                raise ConfigError(f"--{name} values must be finite")
        if self.frac_grid and self.force is not None:
            raise ConfigError("--frac-grid cannot be combined with an absolute --force")
        return self


def config_from_args(args):
    return RunConfig(
        lame_lambda=args.lame_lambda, lame_mu=args.lame_mu,
        normalize_by_mu=not args.no_normalize, length_L=args.length,
        w_z=args.wz, chi=args.chi,
        force=args.force,
        force_frac=None if args.force is not None else args.force_frac,
        delta=args.delta, bc_tag=args.bc, n_grid=args.n_grid, n_samples=args.n_samples,
        seed=args.seed, output_path=args.output, format=args.format, jobs=args.jobs,
        wz_grid=_parse_grid(getattr(args, "wz_grid", None)),
        chi_grid=_parse_grid(getattr(args, "chi_grid", None)),
        frac_grid=_parse_grid(getattr(args, "frac_grid", None)),
    )


def _parse_grid(text):
    if text is None or not text.strip():
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"grid must be a comma-separated list of numbers, got {text!r}")


# ---------------------------------------------------------------------------
# Shared steps
# ---------------------------------------------------------------------------

def coefficients_for(config, w_z=None, chi=None):
    mp = MaterialParams(config.lame_lambda, config.lame_mu, config.normalize_by_mu)
    cs = CrossSection(config.w_z if w_z is None else w_z)
    return build_coefficients(mp, cs, config.chi if chi is None else chi, config.length_L)


def resolve_force(config, coeffs):
    """(f, f_crit or None) for the configured force mode."""
    if config.force is not None:
        return config.force, None
    br = critical_force.f_crit_analytic(coeffs, energy.bc_from_tag(config.bc_tag))
    return config.force_frac * br.f_crit, br.f_crit


def _announce(config, text):
    if config.output_path:
        print(text)


def _emit_json(config, payload):
    reports.write_json(payload, config.output_path)
    _announce(config, f"[EXPORT] wrote {config.output_path}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_coeffs(config, args):
    coeffs = coefficients_for(config)
    _announce(config, f"[COEFFS] c12={coeffs.c12:.6g} c13={coeffs.c13:.6g} "
                      f"c23={coeffs.c23:.6g} k={coeffs.k:.6g}")
    _emit_json(config, coeffs.to_dict())
    return EXIT_OK


def cmd_critical_force(config, args):
    coeffs = coefficients_for(config)
    bc = energy.bc_from_tag(config.bc_tag)
    br = critical_force.f_crit_analytic(coeffs, bc)
    payload = br.to_dict()
    _announce(config, f"[FCRIT] {br.bc}: f_crit={br.f_crit:.10g} (branch {br.branch}, "
                      f"dominant {br.dominant})")
    if config.force is not None:
        payload["f"] = config.force
        payload["straight_rod"] = critical_force.straight_rod_status(coeffs, bc, config.force)
        _announce(config, f"[FCRIT] straight rod at f={config.force:g}: {payload['straight_rod']}")
    if args.numeric is not None:
        f_num = critical_force.f_crit_numeric(coeffs, bc, args.numeric)
        payload["N"] = args.numeric
        payload["f_crit_numeric"] = f_num
        payload["relative_gap"] = critical_force.relative_gap(f_num, br, coeffs)
        _announce(config, f"[FCRIT] numeric (N={args.numeric}) = {f_num:.10g}, "
                          f"gap {payload['relative_gap']:.2e}")
    _emit_json(config, payload)
    return EXIT_OK


def cmd_helix(config, args):
    coeffs = coefficients_for(config)
    f, _ = resolve_force(config, coeffs)
    spec = helix.build_helix(coeffs, f, config.delta)
    _announce(config, f"[HELIX] f={f:.10g} delta={config.delta:g} theta={spec.theta:.12g}")
    _emit_json(config, spec.to_dict())
    if args.curve:
        reports.write_curve_csv(args.curve, helix.sample_curve(spec, config.n_grid))
        print(f"[EXPORT] wrote {args.curve}")
    return EXIT_OK


def run_scan(config, w_z=None, chi=None):
    """Build the flat helix for one parameter point and scan it."""
    coeffs = coefficients_for(config, w_z, chi)
    f, f_crit = resolve_force(config, coeffs)
    spec = helix.build_helix(coeffs, f, config.delta)
    sys_ = conjugate.system_for_helix(spec, coeffs)
    report = conjugate.scan(sys_, coeffs.length_L, config.n_samples)
    params = {
        "w_z": config.w_z if w_z is None else w_z, "chi": coeffs.chi, "L": coeffs.length_L,
        "f": f, "f_crit": f_crit, "delta": config.delta, "theta": spec.theta,
        "bc": config.bc_tag,
    }
    return report, params


def _companion(path, suffix):
    other = path.with_suffix(suffix)
    return other if other != path else path.with_name(path.name + suffix)


def scan_paths(output_path, fmt, report=None):
    """(csv, json) files for a scan written to output_path in format fmt."""
    out = Path(output_path)
    if fmt == "csv":
        return str(out), report or str(_companion(out, ".json"))
    return str(_companion(out, ".csv")), report or str(out)


def cmd_scan(config, args):
    report, params = run_scan(config)
    payload = report.to_dict(params)
    _announce(config, f"[SCAN] w_z={params['w_z']:g} chi={params['chi']:g}: "
                      f"verdict {report.verdict}, conjugate points {list(report.conjugate_points)}")
    if config.output_path:
        csv_path, json_path = scan_paths(config.output_path, config.format, args.report)
        reports.write_scan_csv(csv_path, report)
        reports.write_json(payload, json_path)
        print(f"[EXPORT] wrote {csv_path}")
        print(f"[EXPORT] wrote {json_path}")
    else:
        if config.format == "csv":
            reports.write_scan_csv(None, report)
        else:
            reports.write_json(payload)
        if args.report:
            reports.write_json(payload, args.report)
    for flag in report.flags:
        logger.warning("scan flagged: %s", flag)
    return EXIT_OK


def _sweep_point(payload):
    config, w_z, chi, frac = payload
    setup_logging()
    row = {"w_z": w_z, "chi": chi, "force_frac": frac, "f_crit": None, "theta": None,
           "verdict": "", "flags": ""}
    if frac is not None:
        config = replace(config, force_frac=frac)
    try:
        report, params = run_scan(config, w_z, chi)
    except Exception as e:
        report_failure("stability.sweep", e)
        row["verdict"] = "error"
        row["flags"] = f"{type(e).__name__}: {e}"
        return row
    row.update(f_crit=params["f_crit"], theta=params["theta"], verdict=report.verdict,
               flags=";".join(report.flags))
    return row


def sweep_points(config):
    """Grid points in row order: w_z outermost, force fraction innermost."""
    fracs = config.frac_grid or [config.force_frac]
    return [(config, w_z, chi, frac)
            for w_z in config.wz_grid for chi in config.chi_grid for frac in fracs]


def run_sweep(config):
    points = sweep_points(config)
    if config.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(_sweep_point, points))
    return [_sweep_point(p) for p in points]


def cmd_sweep(config, args):
    rows = run_sweep(config)
    reports.write_sweep_csv(config.output_path, rows)
    if config.output_path:
        print("=" * 70)
        print(f"[SWEEP] {len(rows)} point(s), {sum(r['verdict'] == 'error' for r in rows)} error(s)")
        for r in rows:
            frac = "" if r["force_frac"] is None else f"{r['force_frac']:g}"
            print(f"  w_z={r['w_z']:<8g} chi={r['chi']:<8g} frac={frac:<8} {r['verdict']:<9} {r['flags']}")
        print("=" * 70)
    _announce(config, f"[EXPORT] wrote {config.output_path}")
    return EXIT_OK


def initial_curve(config, coeffs, bc, init):
    L, N = config.length_L, config.n_grid
    if init == "straight":
        return energy.straight(L, N)
    if init == "curved":
        return energy.curved_beam(coeffs, L, N)
    if init == "random":
        rng = np.random.default_rng(config.seed)
        return energy.random_curve(L, N, bc, rng)
    return reports.read_curve_csv(init)


def cmd_minimize(config, args):
    coeffs = coefficients_for(config)
    bc = energy.bc_from_tag(config.bc_tag)
    f, _ = resolve_force(config, coeffs)
    curve0 = initial_curve(config, coeffs, bc, args.init)
    _announce(config, f"[MIN] bc={bc.tag} f={f:.10g} N={curve0.n_elements} init={args.init}")

    code = EXIT_OK
    try:
        curve, trace = energy.minimize(curve0, coeffs, f, bc, max_iter=args.max_iter,
                                       tol=args.tol)
    except NoConvergence as e:
        report_failure("stability.minimize", e)
        curve, trace = e.result
        code = EXIT_NO_CONVERGENCE

    reports.write_curve_csv(config.output_path, curve)
    _announce(config, f"[MIN] {trace.iterations} iteration(s), E={trace.energies[-1]:.12g}, "
                      f"|g|={trace.grad_norms[-1]:.3e}")
    _announce(config, f"[EXPORT] wrote {config.output_path}")
    if args.trace:
        reports.write_trace_csv(args.trace, trace)
        print(f"[EXPORT] wrote {args.trace}")
    return code


COMMANDS = {
    "coeffs": cmd_coeffs,
    "critical-force": cmd_critical_force,
    "helix": cmd_helix,
    "scan": cmd_scan,
    "sweep": cmd_sweep,
    "minimize": cmd_minimize,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda", dest="lame_lambda", type=float, default=DEFAULT_LAME_LAMBDA,
                        help="Lame constant lambda (default %(default)s)")
    common.add_argument("--mu", dest="lame_mu", type=float, default=DEFAULT_LAME_MU,
                        help="Lame constant mu (default %(default)s)")
    common.add_argument("--no-normalize", action="store_true",
                        help="Keep absolute moduli instead of dividing the energy by mu")
    common.add_argument("--length", type=float, default=DEFAULT_LENGTH, help="Rod length L")
    common.add_argument("--wz", type=float, default=DEFAULT_WZ,
                        help="Half-height w_z of the unit-area rectangle")
    common.add_argument("--chi", type=float, default=DEFAULT_CHI, help="Prestrain strength")
    force = common.add_mutually_exclusive_group()
    force.add_argument("--force", type=float, default=None, help="Absolute end force f")
    force.add_argument("--force-frac", type=float, default=DEFAULT_FORCE_FRACTION,
                       help="Force as a fraction of f_crit (default %(default)s)")
    common.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                        help="Boundary tilt of the flat helix")
    common.add_argument("--bc", choices=energy.BC_TAGS, default=DEFAULT_BC,
                        help="Boundary condition (default %(default)s)")
    common.add_argument("--n-grid", type=int, default=DEFAULT_N_GRID,
                        help="Elements for matrices and curves")
    common.add_argument("--n-samples", type=int, default=DEFAULT_N_SAMPLES,
                        help="t-samples per conjugate-point scan")
    common.add_argument("--seed", type=int, default=0, help="Seed for random starting curves")
    common.add_argument("--output", default=None, help="Output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--jobs", type=int, default=1, help="Parallel sweep workers")

    parser = argparse.ArgumentParser(description="Rod stability toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common], help="Limit-model coefficients")
    p = sub.add_parser("critical-force", parents=[common], help="Critical force of the straight rod")
    p.add_argument("--numeric", type=int, default=None, metavar="N",
                   help="Also compute the discretized value with N elements")
    p = sub.add_parser("helix", parents=[common], help="Flat helix for (f, delta)")
    p.add_argument("--curve", default=None, help="Also write the sampled helix as curve CSV")
    p = sub.add_parser("scan", parents=[common], help="Conjugate-point scan of the flat helix")
    p.add_argument("--report", default=None, help="Also write the JSON verdict here")
    p = sub.add_parser("sweep", parents=[common], help="Scan a (w_z, chi) grid")
    p.add_argument("--wz-grid", default=DEFAULT_SWEEP_WZ, help="Comma-separated w_z values")
    p.add_argument("--chi-grid", default=DEFAULT_SWEEP_CHI, help="Comma-separated chi values")
    p.add_argument("--frac-grid", default=DEFAULT_SWEEP_FRAC,
                   help="Comma-separated force fractions (empty: use --force-frac)")
    p = sub.add_parser("minimize", parents=[common], help="Energy minimization from a start curve")
    p.add_argument("--init", default="straight",
                   help=f"{' | '.join(INIT_CHOICES)} | path to a curve CSV")
    p.add_argument("--max-iter", type=int, default=MINIMIZE_MAX_ITER)
    p.add_argument("--tol", type=float, default=MINIMIZE_TOL)
    p.add_argument("--trace", default=None, help="Energy trace CSV")
    return parser


def main(argv=None):
    load_dotenv()
    setup_logging()
    args = build_parser().parse_args(argv)

    try:
        config = config_from_args(args).validate(args.command)
        if args.command == "minimize" and args.n_grid == DEFAULT_N_GRID:
            config.n_grid = DEFAULT_N_CURVE
        return COMMANDS[args.command](config, args)
    except NoConvergence as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except NUMERIC_ERRORS as e:
        report_failure("stability", e)
        return EXIT_NO_CONVERGENCE
    except CONSTRUCTION_ERRORS as e:
        print(f"ERROR: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except (ConfigError, ValueError, OSError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
