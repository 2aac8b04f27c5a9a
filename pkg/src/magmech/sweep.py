"""Parameter sweeps over one or two axes, evaluated cell by cell.

A sweep spec is a small ``key = value`` file::

    metric = n_add_ratio          # n_add_ratio | s_ff | phi_opt | stability
    variant = full-kerr
    axis1 = C_over_CSQL log 0.01 100 41
    axis2 = K list 0 0.6e-9 1.2e-9 hz_over_2pi
    phi = opt                     # or a fixed angle in rad
    omega = omega_b               # or a value in rad/s
    branch = lowest

Axis lines are ``name scale start stop points [hz_over_2pi]`` for ``lin`` and
``log`` scales, or ``name list v1 v2 ... [hz_over_2pi]``.  Every cell is a
pure function of (base params, spec, cell coordinates), so the grid does not
depend on how cells are distributed over worker processes.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ConfigError, parse_key_values
from .linear_model import StaleStateError, build_model, normalize_variant
from .params import TWO_PI, PhysicalParams
from .serialize import atomic_write_text, csv_text, fmt, json_text, sidecar_path
from .spectra import (N_ADD_SQL, NoTransductionError, ScanError, SingularSystemError,
                      added_noise, force_psd, optimize_homodyne, sql_baseline)
from .stability import STABLE, StabilityConsistencyError, classify
from .steady_state import (SteadyStateError, select_branch, solve_steady_state,
                           state_at_cooperativity)

AXIS_NAMES = ("C_over_CSQL", "K", "phi", "g_mb", "g_ma", "T", "omega")
ANGULAR_AXES = ("K", "g_mb", "g_ma", "omega")
PARAM_OF_AXIS = {"K": "kerr_K", "g_mb": "g_mb", "g_ma": "g_ma", "T": "bath_T"}
METRICS = ("n_add_ratio", "s_ff", "phi_opt", "stability")
SCALES = ("lin", "log", "list")
STABILITY_HEADER = ("axis1", "axis2", "verdict")

OK = "ok"
UNSTABLE = "unstable"
ERROR = "error"

CELL_ERRORS = (SteadyStateError, StaleStateError, SingularSystemError, NoTransductionError,
               StabilityConsistencyError, ScanError, ArithmeticError, ValueError)


class SweepSpecError(ValueError):
    pass


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class Axis:
    name: str
    scale: str
    values: tuple
    hz_over_2pi: bool = False

    def array(self) -> np.ndarray:
        """Axis values in internal units (rad/s for angular axes)."""
        v = np.array(self.values, dtype=float)
        if self.scale == "lin":
            v = np.linspace(v[0], v[1], int(v[2]))
        elif self.scale == "log":
            v = np.logspace(math.log10(v[0]), math.log10(v[1]), int(v[2]))
        return v * TWO_PI if self.hz_over_2pi else v

    def text(self) -> str:
        vals = list(self.values)
        if self.scale != "list":
            vals[2] = int(vals[2])
        parts = [self.name, self.scale] + [str(v) if isinstance(v, int) else fmt(v) for v in vals]
        if self.hz_over_2pi:
            parts.append("hz_over_2pi")
        return " ".join(parts)


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple
    metric: str
    variant: str = "full_kerr"
    phi: str = "opt"
    omega: str = "omega_b"
    branch: str = "lowest"

    def text(self) -> str:
        lines = [f"metric = {self.metric}", f"variant = {self.variant}"]
        lines += [f"axis{k} = {ax.text()}" for k, ax in enumerate(self.axes, start=1)]
        lines += [f"phi = {self.phi}", f"omega = {self.omega}", f"branch = {self.branch}"]
        return "\n".join(lines) + "\n"

    @property
    def shape(self) -> tuple:
        return tuple(ax.array().size for ax in self.axes)


@dataclass(eq=False)
class SweepGrid:
    spec: SweepSpec
    params: PhysicalParams
    axes: list
    values: np.ndarray
    phi: np.ndarray
    status: np.ndarray
    c_sql: np.ndarray
    errors: dict = field(default_factory=dict)

    @property
    def stable(self) -> np.ndarray:
        """Boolean mask of cells whose fixed point is stable."""
        if self.spec.metric == "stability":
            return self.status == STABLE
        return self.status == OK

    def computed_fraction(self) -> float:
        return float(np.mean(self.status != ERROR))


def _parse_axis(raw: str, source: str) -> Axis:
    tokens = raw.split()
    if len(tokens) < 3:
        raise SweepSpecError(f"{source}: axis needs 'name scale values...', got {raw!r}")
    name, scale, rest = tokens[0], tokens[1], tokens[2:]
    if name not in AXIS_NAMES:
        raise SweepSpecError(f"{source}: unknown axis {name!r} (expected one of {', '.join(AXIS_NAMES)})")
    if scale not in SCALES:
        raise SweepSpecError(f"{source}: unknown scale {scale!r} for axis {name}")
    hz = bool(rest) and rest[-1] == "hz_over_2pi"
    if hz:
        rest = rest[:-1]
        if name not in ANGULAR_AXES:
            raise SweepSpecError(f"{source}: axis {name} is not an angular quantity")
    try:
        nums = [float(t) for t in rest]
    except ValueError:
        raise SweepSpecError(f"{source}: non-numeric value in axis {name}: {raw!r}") from None
    if scale == "list":
        if not nums:
            raise SweepSpecError(f"{source}: axis {name} lists no values")
        return Axis(name, scale, tuple(nums), hz)
    if len(nums) != 3:
        raise SweepSpecError(f"{source}: axis {name} needs 'start stop points'")
    start, stop, points = nums
    if points != int(points) or points < 1:
        raise SweepSpecError(f"{source}: axis {name} points must be a positive integer")
    if points == 1 and start != stop:
        raise SweepSpecError(f"{source}: single-point axis {name} needs start == stop")
    if scale == "log" and not (start > 0 and stop > 0):
        raise SweepSpecError(f"{source}: log axis {name} needs a positive range")
    return Axis(name, scale, (start, stop, int(points)), hz)


def parse_spec(text: str, source: str = "<spec>") -> SweepSpec:
    try:
        entries = parse_key_values(text, source)
    except ConfigError as exc:
        raise SweepSpecError(str(exc)) from None
    if not entries:
        raise SweepSpecError(f"{source}: empty sweep spec")
    known = {"metric", "variant", "axis1", "axis2", "phi", "omega", "branch"}
    unknown = sorted(set(entries) - known)
    if unknown:
        raise SweepSpecError(f"{source}: unknown key(s) {', '.join(unknown)}")
    if "metric" not in entries or "axis1" not in entries:
        raise SweepSpecError(f"{source}: 'metric' and 'axis1' are required")
    metric = entries["metric"]
    if metric not in METRICS:
        raise SweepSpecError(f"{source}: unknown metric {metric!r}")
    axes = [_parse_axis(entries["axis1"], source)]
    if "axis2" in entries:
        axes.append(_parse_axis(entries["axis2"], source))
        if axes[0].name == axes[1].name:
            raise SweepSpecError(f"{source}: axis names must be distinct")
    try:
        variant = normalize_variant(entries.get("variant", "full_kerr"))
    except ValueError as exc:
        raise SweepSpecError(f"{source}: {exc}") from None
    phi = entries.get("phi", "opt")
    if phi != "opt":
        try:
            phi = fmt(float(phi))
        except ValueError:
            raise SweepSpecError(f"{source}: phi must be 'opt' or a number") from None
    names = [ax.name for ax in axes]
    if metric == "phi_opt" and ("phi" in names or phi != "opt"):
        raise SweepSpecError(f"{source}: metric phi_opt needs an optimized angle")
    omega = entries.get("omega", "omega_b")
    if omega != "omega_b":
        try:
            omega = fmt(float(omega))
        except ValueError:
            raise SweepSpecError(f"{source}: omega must be 'omega_b' or a number") from None
    branch = entries.get("branch", "lowest")
    if branch not in ("lowest", "highest") and not branch.startswith("index:"):
        raise SweepSpecError(f"{source}: unknown branch policy {branch!r}")
    return SweepSpec(tuple(axes), metric, variant, phi, omega, branch)


def load_spec(path) -> SweepSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read(), str(path))


def evaluate_cell(params: PhysicalParams, spec: SweepSpec, coords: dict):
    """(metric value, phi used, C_SQL, status, message) for one cell."""
    p = params
    for name, value in coords.items():
        if name in PARAM_OF_AXIS:
            p = p.replace(**{PARAM_OF_AXIS[name]: float(value)})
    w_sql = p.omega_b if spec.omega == "omega_b" else float(spec.omega)
    w = float(coords.get("omega", w_sql))
    c_sql = math.nan
    try:
        if "C_over_CSQL" in coords:
            c_sql = sql_baseline(p, spec.variant, w_sql).c_sql
            p, state = state_at_cooperativity(p, coords["C_over_CSQL"] * c_sql)
        else:
            state = select_branch(solve_steady_state(p), spec.branch)
        model = build_model(p, state, spec.variant)
        verdict = classify(model).verdict
        if spec.metric == "stability":
            return math.nan, math.nan, c_sql, verdict, ""
        if verdict != STABLE:
            return math.nan, math.nan, c_sql, UNSTABLE, ""
        if "phi" in coords:
            phi = float(coords["phi"])
            n_add = float(added_noise(model, p, w, phi))
        elif spec.phi == "opt":
            phi, n_add = optimize_homodyne(model, p, w)
        else:
            phi = float(spec.phi)
            n_add = float(added_noise(model, p, w, phi))
    except CELL_ERRORS as exc:
        return math.nan, math.nan, c_sql, ERROR, f"{type(exc).__name__}: {exc}"
    if spec.metric == "n_add_ratio":
        value = n_add / N_ADD_SQL
    elif spec.metric == "s_ff":
        value = float(force_psd(p, n_add, model.n_th))
    else:
        value = phi
    return float(value), float(phi), float(c_sql), OK, ""


def _run_chunk(args):
    params, spec, chunk = args
    return [evaluate_cell(params, spec, coords) for coords in chunk]


def _cells(spec: SweepSpec):
    arrays = [ax.array() for ax in spec.axes]
    names = [ax.name for ax in spec.axes]
    for idx in np.ndindex(*[a.size for a in arrays]):
        yield {n: float(a[i]) for n, a, i in zip(names, arrays, idx)}


def run_sweep(spec: SweepSpec, params: PhysicalParams, jobs: int = 1) -> SweepGrid:
    """Evaluate every cell (row-major) and assemble the grid.

    With ``jobs > 1`` cells are farmed out in rows (or blocks for a 1-D
    sweep) to a process pool; results are reassembled in cell order.
    """
    shape = spec.shape
    cells = list(_cells(spec))
    if jobs <= 1:
        results = [evaluate_cell(params, spec, c) for c in cells]
    else:
        size = shape[-1] if len(shape) == 2 else max(1, math.ceil(len(cells) / (4 * jobs)))
        chunks = [cells[i:i + size] for i in range(0, len(cells), size)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = [r for part in pool.map(_run_chunk, [(params, spec, c) for c in chunks])
                       for r in part]
    values = np.array([r[0] for r in results]).reshape(shape)
    phi = np.array([r[1] for r in results]).reshape(shape)
    c_sql = np.array([r[2] for r in results]).reshape(shape)
    status = np.array([r[3] for r in results], dtype=object).reshape(shape)
    errors = {str(k): r[4] for k, r in enumerate(results) if r[3] == ERROR}
    grid = SweepGrid(spec=spec, params=params, axes=[(ax.name, ax.array()) for ax in spec.axes],
                     values=values, phi=phi, status=status, c_sql=c_sql, errors=errors)
    if spec.metric != "stability" and not np.any(status == OK):
        raise SweepError("no stable cell in the sweep grid")
    return grid


def grid_hash(spec: SweepSpec, params: PhysicalParams) -> str:
    key = json.dumps({"spec": spec.text(), "params": params.as_dict(), "version": __version__},
                     sort_keys=True)
    return hashlib.sha256(key.encode()).hexdigest()


def output_name(spec: SweepSpec, params: PhysicalParams) -> str:
    parts = [spec.metric] + [ax.name for ax in spec.axes] + [grid_hash(spec, params)[:8]]
    return "_".join(parts) + ".csv"


def grid_csv(grid: SweepGrid) -> str:
    names = [n for n, _ in grid.axes]
    arrays = [a for _, a in grid.axes]
    rows = []
    for idx in np.ndindex(*grid.values.shape):
        coords = [arrays[k][i] for k, i in enumerate(idx)]
        if grid.spec.metric == "stability":
            rows.append(coords + [grid.status[idx]])
        else:
            rows.append(coords + [grid.values[idx], grid.phi[idx], grid.status[idx]])
    if grid.spec.metric == "stability":
        header = STABILITY_HEADER if len(names) == 2 else ("axis1", "verdict")
    else:
        header = tuple(names) + (grid.spec.metric, "phi_rad", "status")
    return csv_text(header, rows)


def grid_sidecar(grid: SweepGrid) -> str:
    unique_sql = sorted({fmt(c) for c in grid.c_sql.ravel() if not math.isnan(c)}, key=float)
    meta = {
        "spec": grid.spec.text(),
        "params": grid.params.as_dict(),
        "variant": grid.spec.variant,
        "metric": grid.spec.metric,
        "axes": [n for n, _ in grid.axes],
        "shape": list(grid.values.shape),
        "phi_policy": "axis" if "phi" in [n for n, _ in grid.axes] else grid.spec.phi,
        "omega_policy": grid.spec.omega,
        "n_add_sql": N_ADD_SQL,
        "c_sql": [float(c) for c in unique_sql],
        "c_sql_cells": [None if math.isnan(c) else float(c) for c in grid.c_sql.ravel()],
        "errors": grid.errors,
        "code_version": __version__,
        "params_sha256": grid_hash(grid.spec, grid.params),
    }
    return json_text(meta)


def emit(grid: SweepGrid, out_dir) -> str:
    """Write CSV and JSON sidecar into ``out_dir``; returns the CSV path."""
    path = os.path.join(os.fspath(out_dir), output_name(grid.spec, grid.params))
    atomic_write_text(sidecar_path(path), grid_sidecar(grid))
    atomic_write_text(path, grid_csv(grid))
    return path


def parse(csv_path) -> SweepGrid:
    """Rebuild a grid from the files written by :func:`emit`."""
    with open(sidecar_path(csv_path), encoding="utf-8") as fh:
        meta = json.load(fh)
    spec = parse_spec(meta["spec"])
    params = PhysicalParams(**meta["params"])
    shape = tuple(meta["shape"])
    with open(csv_path, encoding="utf-8") as fh:
        lines = fh.read().strip().splitlines()[1:]
    rows = [ln.split(",") for ln in lines]
    n_ax = len(shape)
    stability = spec.metric == "stability"
    status = np.array([r[n_ax] if stability else r[n_ax + 2] for r in rows], dtype=object).reshape(shape)
    if stability:
        values = np.full(shape, math.nan)
        phi = np.full(shape, math.nan)
    else:
        values = np.array([float(r[n_ax]) for r in rows]).reshape(shape)
        phi = np.array([float(r[n_ax + 1]) for r in rows]).reshape(shape)
    c_sql = np.array([math.nan if c is None else c for c in meta["c_sql_cells"]]).reshape(shape)
    axes = [(ax.name, ax.array()) for ax in spec.axes]
    return SweepGrid(spec=spec, params=params, axes=axes, values=values, phi=phi,
                     status=status, c_sql=c_sql, errors=dict(meta["errors"]))


def grids_equal(a: SweepGrid, b: SweepGrid) -> bool:
    def same(x, y):
        return x.shape == y.shape and np.array_equal(x, y, equal_nan=True)

    return (a.spec == b.spec and a.params == b.params and a.errors == b.errors
            and all(na == nb and same(xa, xb) for (na, xa), (nb, xb) in zip(a.axes, b.axes))
            and same(a.values, b.values) and same(a.phi, b.phi) and same(a.c_sql, b.c_sql)
            and np.array_equal(a.status, b.status))
