"""Command-line front end.

    actionrd sweep     solver sweep over (s, m) grids -> curve CSV
    actionrd point     one (s, m) point
    actionrd analytic  closed-form reference for the noiseless erasure example
    actionrd codes     end-to-end code trials at a target (D, C)
    actionrd dmax      zero-rate distortion D_max(C)

Exit codes: 0 success, 2 configuration error, 3 numerical nonconvergence,
4 a check on the results failed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, curves, ldgm, multiplex
from .errors import ActionRDError, ConfigError, InfeasibleTarget
from .scenario import ErasureParams, analytic_rdc, build_erasure, load_scenario
from .solver import SolverParams, Workspace, solve_point

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("actionrd")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
CURVE_COLUMNS = ("s", "m", "R", "D", "C", "converged", "iters")


class CheckFailed(Exception):
    pass


class NotConverged(Exception):
    pass


def _floats(text):
    try:
        vals = [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc
    if not vals:
        raise ConfigError("empty number list")
    return vals


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


# ------------------------------------------------------------------ config

SOLVER_KEYS = ("beta", "outer_tol", "inner_tol", "fp_tol", "max_outer", "max_dual", "max_fp", "dual_step")
MP_KEYS = ("max_iters", "damping_start", "damping", "threshold", "budget")


def _merge_config(args):
    """Fill options left unset on the command line from --config (TOML)."""
    cfg = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        with open(path, "rb") as fh:
            try:
                cfg = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    for key, val in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ConfigError(f"unknown config key {key!r}")
        if getattr(args, attr) in (None, False):
            setattr(args, attr, ",".join(map(str, val)) if isinstance(val, list) else val)
    for attr, default in (("seed", 0), ("mode", "ldgm")):
        if getattr(args, attr, default) is None:
            setattr(args, attr, default)
    return args


def _scenario(args):
    if args.scenario:
        return load_scenario(args.scenario)
    return build_erasure(ErasureParams(K=int(args.K if args.K is not None else 4),
                                       q=float(args.q if args.q is not None else 0.5),
                                       p=float(args.p if args.p is not None else 0.0)))


def _solver_params(args):
    kw = {k: getattr(args, k) for k in SOLVER_KEYS if getattr(args, k, None) is not None}
    try:
        return SolverParams(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _config_hash(args, scenario):
    skip = {"func", "out", "config", "verbose"}
    doc = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    doc["scenario_fingerprint"] = scenario.fingerprint
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _header(args, scenario):
    return [f"actionrd {__version__}", f"command: {args.command}",
            f"config-hash: {_config_hash(args, scenario)}", f"seed: {args.seed}",
            f"scenario: {scenario.name} {scenario.fingerprint}"]


def _csv(header, columns, rows):
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _emit(args, name, text):
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    log.info("wrote %s", out / name)


# ------------------------------------------------------------------ commands

def cmd_sweep(args):
    scen = _scenario(args)
    params = _solver_params(args)
    s_grid = _floats(args.s_grid) if args.s_grid else list(curves.S_GRID)
    m_grid = _floats(args.m_grid) if args.m_grid else list(curves.M_GRID)
    if any(v > 0 for v in s_grid + m_grid):
        raise ConfigError("slopes must be non-positive")
    curve = curves.sweep(scen, s_grid, m_grid, params)
    header = _header(args, scen)
    _emit(args, "sweep.csv", _csv(header, CURVE_COLUMNS, [p.as_row() for p in curve.points]))
    bad = list(curve.points)
    if args.nonadaptive:
        na = curves.nonadaptive_curve(scen, params, s_grid, m_grid)
        _emit(args, "sweep_nonadaptive.csv", _csv(header + ["actions independent of the source"],
                                                  CURVE_COLUMNS, [p.as_row() for p in na.points]))
        bad += na.points
    bad = [p for p in bad if not p.converged]
    if bad and not args.allow_unconverged:
        raise NotConverged(f"{len(bad)} points did not converge")


def cmd_point(args):
    scen = _scenario(args)
    params = _solver_params(args)
    if args.s > 0 or args.m > 0:
        raise ConfigError("slopes must be non-positive")
    p = solve_point(scen, args.s, args.m, params)
    text = _csv(_header(args, scen), CURVE_COLUMNS, [p.as_row()])
    if args.out is None:
        sys.stdout.write(text)
    else:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "points.csv"
        if path.exists():
            with open(path, "a") as fh:
                fh.write(text.splitlines()[-1] + "\n")
        else:
            path.write_text(text)
        print(" ".join(f"{c}={_fmt(v)}" for c, v in zip(CURVE_COLUMNS, p.as_row())))
    if not p.converged and not args.allow_unconverged:
        raise NotConverged(f"point (s={args.s}, m={args.m}) did not converge")


def cmd_analytic(args):
    if args.scenario:
        raise ConfigError("the analytic reference is defined for the built-in erasure example only")
    K = int(args.K if args.K is not None else 4)
    q = float(args.q if args.q is not None else 0.5)
    p = float(args.p if args.p is not None else 0.0)
    if p != 0:
        raise ConfigError("the analytic reference only holds for p = 0")
    scen = build_erasure(K=K, q=q, p=p)
    D_grid = _floats(args.D_grid) if args.D_grid else [round(0.02 + 0.01 * k, 10) for k in range(29)]
    C_list = _floats(args.C_list) if args.C_list else [0.25, 0.5, 0.75]
    rows = [(D, C, analytic_rdc(D, C, K, q, p)) for C in C_list for D in D_grid]
    _emit(args, "analytic.csv", _csv(_header(args, scen), ("D", "C", "R"), rows))


def cmd_dmax(args):
    scen = _scenario(args)
    C_list = _floats(args.C_list) if args.C_list else [round(0.05 * k, 10) for k in range(21)]
    rows = [(C, curves.d_max(scen, C)) for C in C_list]
    _emit(args, "dmax.csv", _csv(_header(args, scen), ("C", "D_max"), rows))


def cmd_codes(args):
    scen = _scenario(args)
    params = _solver_params(args)
    if args.D is None or args.C is None:
        raise ConfigError("codes needs --D and --C")
    n = int(args.n if args.n is not None else 10000)
    trials = int(args.trials if args.trials is not None else 50)
    if n < 1 or trials < 1:
        raise ConfigError("n and trials must be positive")
    profile = ldgm.DegreeProfile.load(args.profile) if args.profile else None
    mp = {k: getattr(args, k) for k in MP_KEYS if getattr(args, k, None) is not None}
    try:
        mp_params = ldgm.MessagePassingParams(seed=args.seed, **mp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    build = multiplex.nonadaptive_design_for_target if args.nonadaptive else multiplex.design_for_target
    eps = float(args.eps if args.eps is not None else 0.02)
    if eps < 0:
        raise ConfigError("eps must be >= 0")
    design = build(scen, args.D, args.C, n, params, mode=args.mode, profile=profile, mp_params=mp_params,
                   eps=eps)
    report = multiplex.evaluate(scen, design, n, trials, args.seed)

    # bound at the empirical point, tightened there by dual refinement
    ws = Workspace(scen, params)
    curve = curves.RdcCurve([], scen.fingerprint, curves.zero_rate_table(scen))
    corner = (report.distortion + 3 * report.distortion_hw, report.cost + 3 * report.cost_hw)
    for D, C in (corner, (report.distortion, report.cost)):
        curves.rd_at(scen, D, C, params, curve=curve, ws=ws)
    ok, floor = multiplex.converse_check(report, curve)
    bound = curves.evaluate_rdc(curve, report.distortion, report.cost)

    header = _header(args, scen) + [
        f"design: D={args.D} C={args.C} n={n} mode={args.mode} "
        f"{'nonadaptive' if args.nonadaptive else 'adaptive'} k={design.k} "
        f"k_a={[b.k_a for b in design.branches]} rate={design.rate:.6g}"]
    _emit(args, "trials.csv", report.to_csv(header))
    summary_cols = ("rate", "distortion", "cost", "distortion_hw", "cost_hw", "bound_at_point",
                    "bound_at_corner", "action_tv", "failed_trials", "converse_ok")
    row = (report.rate, report.distortion, report.cost, report.distortion_hw, report.cost_hw, bound,
           floor, report.action_tv, report.failed_trials, ok)
    _emit(args, "summary.csv", _csv(header, summary_cols, [row]))
    if not ok:
        raise CheckFailed(f"rate {report.rate:.6g} is below R(D, C) >= {floor:.6g} at the 3-half-width corner")


# ------------------------------------------------------------------ parser

def build_parser():
    parser = argparse.ArgumentParser(prog="actionrd", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"actionrd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML file with option defaults; flags override it")
        p.add_argument("--scenario", help="scenario TOML file (default: built-in erasure example)")
        p.add_argument("--K", type=int, help="erasure example: relevant letters (default 4)")
        p.add_argument("--q", type=float, help="erasure example: irrelevant-letter probability (default 0.5)")
        p.add_argument("--p", type=float, help="erasure example: erasure probability (default 0)")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--seed", type=int, help="global seed (default 0)")
        p.add_argument("-v", "--verbose", action="store_true")

    def solver(p):
        p.add_argument("--beta", type=float)
        p.add_argument("--outer-tol", type=float)
        p.add_argument("--inner-tol", type=float)
        p.add_argument("--fp-tol", type=float)
        p.add_argument("--max-outer", type=int)
        p.add_argument("--max-dual", type=int)
        p.add_argument("--max-fp", type=int)
        p.add_argument("--dual-step", choices=("normalized", "subgradient"))
        p.add_argument("--allow-unconverged", action="store_true")

    p = sub.add_parser("sweep", help="solve every (s, m) grid cell")
    common(p), solver(p)
    p.add_argument("--s-grid", help="comma-separated s values (default: -0.25 ... -64)")
    p.add_argument("--m-grid", help="comma-separated m values (default: -0.125 ... -32)")
    p.add_argument("--nonadaptive", action="store_true", help="also sweep the independent-action baseline")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("point", help="solve one (s, m) point")
    common(p), solver(p)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--m", type=float, default=0.0)
    p.set_defaults(func=cmd_point)

    p = sub.add_parser("analytic", help="closed-form R(D, C) of the erasure example (p = 0)")
    common(p)
    p.add_argument("--D-grid", dest="D_grid")
    p.add_argument("--C-list", dest="C_list")
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("codes", help="simulate the code design at a target (D, C)")
    common(p), solver(p)
    p.add_argument("--D", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--n", type=int, help="blocklength (default 10000)")
    p.add_argument("--trials", type=int, help="source realizations (default 50)")
    p.add_argument("--mode", choices=("ldgm", "codebook"), help="source codes (default ldgm)")
    p.add_argument("--nonadaptive", action="store_true", help="actions independent of the source")
    p.add_argument("--eps", type=float, help="padding slack per branch (default 0.02)")
    p.add_argument("--profile", help="LDGM degree-profile file")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--damping-start", type=int)
    p.add_argument("--damping", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--budget", type=int)
    p.set_defaults(func=cmd_codes)

    p = sub.add_parser("dmax", help="zero-rate distortion D_max(C)")
    common(p)
    p.add_argument("--C-list", dest="C_list")
    p.set_defaults(func=cmd_dmax)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _merge_config(args)
        args.func(args)
    except (ConfigError, InfeasibleTarget, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except ActionRDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
