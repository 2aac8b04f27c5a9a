"""Command-line front end.

Exit codes: 0 ok, 2 configuration, 3 solver, 4 instability, 5 SQL scan.
Every run writes its outputs atomically and then a run manifest; a run is
complete exactly when its manifest exists.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__, config
from .linear_model import build_model, normalize_variant
from .params import ParameterError, validate
from .serialize import atomic_write_text, json_text, sidecar_path
from .spectra import (NoTransductionError, ScanError, SingularSystemError, UnstableModelError,
                      compute_spectrum, optimize_homodyne, spectrum_csv, spectrum_sidecar,
                      sql_baseline)
from .stability import StabilityConsistencyError, classify
from .steady_state import SteadyStateError, select_branch, solve_steady_state
from .sweep import (SweepError, SweepSpec, SweepSpecError, _parse_axis, emit, load_spec,
                    run_sweep)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_UNSTABLE, EXIT_SCAN = 0, 2, 3, 4, 5
MIN_COMPUTED_FRACTION = 0.9


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _add_common(parser, suppress: bool) -> None:
    """Global flags; subcommands repeat them with suppressed defaults so that
    a flag given before the subcommand is not overwritten."""
    def d(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--config", default=d(None),
                        help="parameter file (default: packaged default.conf)")
    parser.add_argument("--variant", default=d("full-kerr"),
                        choices=["as-printed", "full-kerr", "as_printed", "full_kerr"])
    parser.add_argument("--branch", default=d("lowest"), help="lowest, highest or index:K")
    parser.add_argument("--out", default=d(None), help="output directory (default: $MAGMECH_OUT or .)")
    parser.add_argument("--jobs", type=int, default=d(1), help="worker processes for sweeps")
    parser.add_argument("--seed", type=int, default=d(0), help="recorded in the manifest")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, suppress=True)
    parser = argparse.ArgumentParser(prog="magmech", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"magmech {__version__}")
    _add_common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("steady", parents=[common], help="list steady states and their stability")

    sp = sub.add_parser("spectrum", parents=[common], help="homodyne spectrum on a frequency grid")
    sp.add_argument("--phi", default="opt", help="homodyne angle in rad, or 'opt' (at omega_b)")
    sp.add_argument("--omega-min", type=float, help="rad/s (default 0.95 omega_b)")
    sp.add_argument("--omega-max", type=float, help="rad/s (default 1.05 omega_b)")
    sp.add_argument("--points", type=int, default=201)

    sw = sub.add_parser("sweep", parents=[common], help="run a sweep spec file")
    sw.add_argument("spec", help="sweep spec file")

    sub.add_parser("sql", parents=[common], help="SQL cooperativity and added noise (K = 0)")

    sm = sub.add_parser("stability-map", parents=[common], help="stability verdicts over two axes")
    sm.add_argument("--axis1", required=True, help="e.g. 'K lin 0 2e-8 11 hz_over_2pi'")
    sm.add_argument("--axis2", help="e.g. 'C_over_CSQL log 0.01 1e6 25'")
    return parser


def _out_dir(args) -> str:
    return args.out or os.environ.get("MAGMECH_OUT") or "."


def _load_params(args):
    path = args.config or str(config.data_path("default.conf"))
    try:
        params = validate(config.load(path))
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read config: {exc}") from None
    except (config.ConfigError, ParameterError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid config: {exc}") from None
    return path, params


def _hash8(*parts) -> str:
    return hashlib.sha256(json.dumps(parts, sort_keys=True).encode()).hexdigest()[:8]


def _write_manifest(args, cfg_path, params, variant, outputs, started) -> str:
    manifest = {
        "subcommand": args.command,
        "config_path": os.path.abspath(cfg_path),
        "config_sha256": config.file_sha256(cfg_path),
        "params": params.as_dict(),
        "variant": variant,
        "branch": args.branch,
        "seed": args.seed,
        "jobs": args.jobs,
        "outputs": [os.path.abspath(p) for p in outputs],
        "wall_time_s": time.perf_counter() - started,
        "code_version": __version__,
    }
    name = f"manifest_{args.command}_{_hash8(manifest['outputs'])}.json"
    path = os.path.join(_out_dir(args), name)
    atomic_write_text(path, json_text(manifest))
    return path


def _states(params):
    try:
        return solve_steady_state(params)
    except SteadyStateError as exc:
        raise CliError(EXIT_SOLVER, f"steady-state solver failed: {exc}") from None


def cmd_steady(args, params, variant):
    rows = []
    for s in _states(params):
        try:
            verdict = classify(build_model(params, s, variant)).verdict
        except StabilityConsistencyError as exc:
            raise CliError(EXIT_SOLVER, str(exc)) from None
        rows.append({"branch": s.branch, "n_m": s.n_m, "q_s": s.q_s,
                     "delta_m_eff": s.delta_m_eff, "residual": s.residual, "verdict": verdict,
                     "m_s": [s.m_s.real, s.m_s.imag], "a_s": [s.a_s.real, s.a_s.imag]})
    print(f"{'branch':<8} {'x=|m_s|^2':>14} {'Q_s':>14} {'delta_m_eff':>14} "
          f"{'residual':>10}  verdict")
    for r in rows:
        print(f"{r['branch']:<8} {r['n_m']:14.6e} {r['q_s']:14.6e} {r['delta_m_eff']:14.6e} "
              f"{r['residual']:10.2e}  {r['verdict']}")
    path = os.path.join(_out_dir(args), f"steady_{_hash8(params.as_dict(), variant)}.json")
    atomic_write_text(path, json_text({"params": params.as_dict(), "variant": variant,
                                       "states": rows, "code_version": __version__}))
    return [path]


def cmd_spectrum(args, params, variant):
    state = select_branch(_states(params), args.branch)
    model = build_model(params, state, variant)
    w_lo = args.omega_min if args.omega_min is not None else 0.95 * params.omega_b
    w_hi = args.omega_max if args.omega_max is not None else 1.05 * params.omega_b
    if args.points < 1 or not (math.isfinite(w_lo) and math.isfinite(w_hi)):
        raise CliError(EXIT_CONFIG, "invalid frequency grid")
    grid = np.linspace(w_lo, w_hi, args.points)
    try:
        if args.phi == "opt":
            phi, _ = optimize_homodyne(model, params)
        else:
            phi = float(args.phi)
        result = compute_spectrum(model, params, grid, phi)
    except UnstableModelError as exc:
        raise CliError(EXIT_UNSTABLE, str(exc)) from None
    except ValueError:
        raise CliError(EXIT_CONFIG, f"--phi must be a number or 'opt' (got {args.phi!r})") from None
    except (NoTransductionError, SingularSystemError) as exc:
        raise CliError(EXIT_SOLVER, str(exc)) from None
    key = _hash8(params.as_dict(), variant, args.branch, float(phi), w_lo, w_hi, args.points)
    path = os.path.join(_out_dir(args), f"spectrum_{key}.csv")
    atomic_write_text(sidecar_path(path), spectrum_sidecar(
        result, params, variant, branch=state.branch,
        omega_grid={"scale": "lin", "start": w_lo, "stop": w_hi, "points": args.points}))
    atomic_write_text(path, spectrum_csv(result))
    finite = result.n_add[np.isfinite(result.n_add)]
    best = f"{finite.min():.6g}" if finite.size else "n/a (no mechanical transduction)"
    print(f"phi = {phi:.6f} rad, {args.points} points, min n_add = {best}")
    print(path)
    return [path, sidecar_path(path)]


def _run_grid(args, params, spec: SweepSpec):
    try:
        grid = run_sweep(spec, params, jobs=max(1, args.jobs))
    except SweepError as exc:
        raise CliError(EXIT_UNSTABLE, str(exc)) from None
    path = emit(grid, _out_dir(args))
    frac = grid.computed_fraction()
    counts = {s: int(np.sum(grid.status == s)) for s in sorted(set(grid.status.ravel()))}
    print(f"{path}  cells {grid.status.size}  " + "  ".join(f"{k}={v}" for k, v in counts.items()))
    return [path, sidecar_path(path)], frac


def cmd_sweep(args, params, variant):
    try:
        spec = load_spec(args.spec)
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read sweep spec: {exc}") from None
    except SweepSpecError as exc:
        raise CliError(EXIT_CONFIG, f"invalid sweep spec: {exc}") from None
    return _run_grid(args, params, spec)


def cmd_stability_map(args, params, variant):
    try:
        axes = [_parse_axis(a, "--axis") for a in (args.axis1, args.axis2) if a]
    except SweepSpecError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    if len(axes) == 2 and axes[0].name == axes[1].name:
        raise CliError(EXIT_CONFIG, "axis names must be distinct")
    spec = SweepSpec(axes=tuple(axes), metric="stability", variant=variant, branch=args.branch)
    return _run_grid(args, params, spec)


def cmd_sql(args, params, variant):
    if params.kerr_K != 0.0:
        print(f"warning: kerr_K = {params.kerr_K!r} ignored; the SQL baseline is defined at K = 0",
              file=sys.stderr)
    try:
        base = sql_baseline(params, variant)
    except ScanError as exc:
        raise CliError(EXIT_SCAN, f"SQL scan failed: {exc}") from None
    print(f"C_SQL = {base.c_sql:.6g}")
    print(f"n_add_SQL = {base.n_add_sql}")
    print(f"n_add at C_SQL = {base.n_add_min:.6g} (phi = {base.phi_opt:.6f} rad)")
    path = os.path.join(_out_dir(args), f"sql_{_hash8(params.replace(kerr_K=0.0).as_dict(), variant)}.json")
    atomic_write_text(path, json_text({"c_sql": base.c_sql, "n_add_sql": base.n_add_sql,
                                       "n_add_min": base.n_add_min, "phi_opt": base.phi_opt,
                                       "omega": base.omega, "variant": variant,
                                       "params": params.as_dict(), "code_version": __version__}))
    return [path]


COMMANDS = {"steady": cmd_steady, "spectrum": cmd_spectrum, "sweep": cmd_sweep,
            "sql": cmd_sql, "stability-map": cmd_stability_map}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        if args.branch not in ("lowest", "highest") and not (
                args.branch.startswith("index:") and args.branch[6:].isdigit()):
            raise CliError(EXIT_CONFIG, f"invalid --branch {args.branch!r}")
        variant = normalize_variant(args.variant)
        cfg_path, params = _load_params(args)
        result = COMMANDS[args.command](args, params, variant)
        outputs, frac = result if isinstance(result, tuple) else (result, 1.0)
        _write_manifest(args, cfg_path, params, variant, outputs, started)
        if frac < MIN_COMPUTED_FRACTION:
            print(f"error: only {frac:.0%} of cells computed", file=sys.stderr)
            return EXIT_SOLVER
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SteadyStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
