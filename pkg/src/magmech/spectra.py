"""Frequency-domain response: homodyne spectra, added noise and force PSD.

All quantities follow from the transfer matrix T(w) = (-i w I - A)^-1 B.
For a homodyne angle phi the measured row is c . O[0:2] with
c = (cos phi, sin phi), so both the symmetrized spectrum and the mechanical
gain are 2x2 quadratic forms in c.  ``_angle_forms`` builds those forms once
per frequency and every angle-dependent quantity is evaluated from them.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import constants, optimize

from . import __version__
from .linear_model import (FULL_KERR, VACUUM_ANTISYM, LinearModel, build_model,
                           normalize_variant)
from .params import PhysicalParams
from .serialize import csv_text, json_text
from .stability import STABLE, classify
from .steady_state import state_at_cooperativity

N_ADD_SQL = 0.5
R_MIN = 1e-30
PHI_SCAN_POINTS = 256
SPECTRUM_HEADER = ("omega_rad_s", "s_ii", "r_m_phi", "n_add", "s_ff_N2_per_Hz")


class SingularSystemError(ArithmeticError):
    pass


class UnstableModelError(RuntimeError):
    def __init__(self, detail: str = ""):
        msg = "spectrum undefined for unstable fixed point"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class NoTransductionError(ArithmeticError):
    def __init__(self):
        super().__init__("no mechanical transduction at this (omega, phi)")


class ScanError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    omega_grid: np.ndarray
    phi: float
    s_ii: np.ndarray
    r_m_phi: np.ndarray
    n_add: np.ndarray
    s_ff: np.ndarray


def transfer_matrix(model: LinearModel, omega):
    """T(w) = (-i w I - A)^-1 B; shape (6, 5), or (n, 6, 5) for an array of w."""
    w = np.asarray(omega, dtype=float)
    A, B = model.drift, model.input
    n = A.shape[0]
    lhs = -1j * w.reshape(-1, 1, 1) * np.eye(n) - A
    try:
        T = np.linalg.solve(lhs, np.broadcast_to(B, (lhs.shape[0],) + B.shape))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"-i w I - A is singular: {exc}") from None
    if not np.all(np.isfinite(T)):
        raise SingularSystemError("-i w I - A is numerically singular")
    return T[0] if w.ndim == 0 else T


def output_transfer(model: LinearModel, params: PhysicalParams, omega):
    """Output quadratures (Xa, Ya, Xm, Ym)_out as a (4, 5) map of the inputs."""
    T = transfer_matrix(model, omega)
    rates = np.sqrt([params.kappa_a, params.kappa_a, params.kappa_m, params.kappa_m])
    return rates[:, None] * T[..., 0:4, :] - np.eye(4, 5)


def _require_stable(model: LinearModel) -> None:
    report = classify(model)
    if report.verdict != STABLE:
        raise UnstableModelError(f"verdict {report.verdict}, max Re(lambda) = "
                                 f"{report.eigen_real_max:.6e}")


def _angle_forms(model: LinearModel, params: PhysicalParams, omega):
    """Real symmetric 2x2 forms (S, R) with s_ii = c.S.c and r_m_phi = c.R.c.

    S is assembled from the non-symmetrized input correlations (with the
    +-i/2 vacuum terms) at +w and -w and averaged.
    """
    w = np.asarray(omega, dtype=float)
    both = np.stack([w, -w], axis=-1).reshape(-1)
    O = output_transfer(model, params, both)[..., 0:2, :]
    O = O.reshape(w.shape + (2, 2, 5))
    M = model.noise_sym + VACUUM_ANTISYM
    P = np.einsum("...ai,ij,...bj->...ab", O, M, O.conj())
    S = 0.5 * (P[..., 0, :, :] + P[..., 1, :, :]).real
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    xi = O[..., 0, :, 4]
    R = np.einsum("...a,...b->...ab", xi, xi.conj()).real
    return S, R


def _unit(phi):
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1)


def _quad(form, c):
    return np.einsum("...a,...ab,...b->...", c, form, c)


def homodyne_spectrum(model: LinearModel, params: PhysicalParams, omega, phi):
    """Symmetrized homodyne spectrum and mechanical gain at angle ``phi``."""
    _require_stable(model)
    S, R = _angle_forms(model, params, omega)
    c = _unit(phi)
    return _quad(S, c), _quad(R, c)


def _n_add_from(s_ii, r_m, n_th):
    r_m = np.asarray(r_m)
    if np.any(r_m < R_MIN):
        raise NoTransductionError()
    return s_ii / r_m - (n_th + 0.5)


def added_noise(model: LinearModel, params: PhysicalParams, omega, phi):
    """n_add = S_II / R_m - (n_th + 1/2)."""
    s_ii, r_m = homodyne_spectrum(model, params, omega, phi)
    return _n_add_from(s_ii, r_m, model.n_th)


def force_psd(params: PhysicalParams, n_add, n_th: float):
    """S_FF = 2 hbar m_eff gamma_b omega_b (n_th + 1/2 + n_add) in N^2/Hz."""
    pref = 2.0 * constants.hbar * params.m_eff * params.gamma_b * params.omega_b
    return pref * (n_th + 0.5 + np.asarray(n_add, dtype=float))


def _optimize_forms(S, R, n_th):
    def f(phi):
        c = _unit(phi)
        r_m = _quad(R, c)
        # angles with no transduction are simply never optimal
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(r_m >= R_MIN, _quad(S, c) / r_m, np.inf) - (n_th + 0.5)

    grid = np.arange(PHI_SCAN_POINTS) * (math.pi / PHI_SCAN_POINTS)
    values = f(grid)
    if not np.isfinite(values).any():
        raise NoTransductionError()
    i = int(np.argmin(values))
    step = math.pi / PHI_SCAN_POINTS
    phi0, best = grid[i], float(values[i])
    lo, hi = phi0 - step, phi0 + step
    if f(lo) > best and f(hi) > best:
        res = optimize.minimize_scalar(lambda t: float(f(t)), bracket=(lo, phi0, hi),
                                       method="golden", tol=1e-10)
        if res.fun <= best:
            phi0, best = float(res.x), float(res.fun)
    return float(np.mod(phi0, math.pi)), best


def optimize_homodyne(model: LinearModel, params: PhysicalParams, omega=None):
    """(phi*, n_add*) minimizing added noise over phi in [0, pi)."""
    _require_stable(model)
    w = params.omega_b if omega is None else float(omega)
    S, R = _angle_forms(model, params, w)
    return _optimize_forms(S, R, model.n_th)


@dataclass(frozen=True)
class SQLBaseline:
    c_sql: float
    n_add_sql: float
    n_add_min: float
    phi_opt: float
    omega: float


def optimal_noise_at_cooperativity(params: PhysicalParams, cooperativity: float,
                                   variant: str = FULL_KERR, omega=None):
    """(n_add*, phi*) at the drive that realizes ``cooperativity``.

    Returns ``(nan, nan)`` when that fixed point is not stable.
    """
    q, state = state_at_cooperativity(params, cooperativity)
    model = build_model(q, state, variant)
    if classify(model).verdict != STABLE:
        return math.nan, math.nan
    phi, n_add = optimize_homodyne(model, q, omega)
    return n_add, phi


@functools.lru_cache(maxsize=64)
def _sql_cached(params, variant, omega, c_range, per_decade):
    def noise(log_c):
        try:
            return optimal_noise_at_cooperativity(params, 10.0**log_c, variant, omega)[0]
        except NoTransductionError:
            return math.nan

    lo, hi = (math.log10(c) for c in c_range)
    n = int(round((hi - lo) * per_decade)) + 1
    logs = np.linspace(lo, hi, n)
    values = np.array([noise(t) for t in logs])
    ok = np.isfinite(values)
    if not ok.any():
        raise ScanError("no stable, transducing point in the cooperativity scan")
    masked = np.where(ok, values, np.inf)
    i = int(np.argmin(masked))
    if i == 0 or i == n - 1 or not (ok[i - 1] and ok[i + 1]):
        raise ScanError(f"no interior minimum of n_add for C in [{c_range[0]:g}, {c_range[1]:g}] "
                        f"(minimum at C = {10**logs[i]:.4g})")
    res = optimize.minimize_scalar(noise, bounds=(logs[i - 1], logs[i + 1]), method="bounded",
                                   options={"xatol": 1e-7})
    log_c = float(res.x) if res.fun <= values[i] else float(logs[i])
    c_sql = 10.0**log_c
    n_min, phi = optimal_noise_at_cooperativity(params, c_sql, variant, omega)
    return SQLBaseline(c_sql=c_sql, n_add_sql=N_ADD_SQL, n_add_min=float(n_min),
                       phi_opt=float(phi), omega=float(omega))


def sql_baseline(params: PhysicalParams, variant: str = FULL_KERR, omega=None,
                 c_range=(1e-4, 1e8), points_per_decade: int = 4) -> SQLBaseline:
    """Cooperativity of least added noise with the Kerr term switched off.

    ``n_add_sql`` is the zero-point value 1/2 by convention; ``n_add_min`` is
    the added noise actually reached at ``c_sql``.  Results are cached per
    (params, variant, omega, scan).
    """
    # the drive is set by each scanned cooperativity, so it is not part of the key
    p = params.replace(kerr_K=0.0, drive_Omega=0.0)
    w = p.omega_b if omega is None else float(omega)
    return _sql_cached(p, normalize_variant(variant), w, tuple(float(c) for c in c_range),
                       int(points_per_decade))


def compute_spectrum(model: LinearModel, params: PhysicalParams, omega_grid, phi: float) -> SpectrumResult:
    """Spectrum, gain, added noise and force PSD on ``omega_grid`` at angle ``phi``."""
    w = np.asarray(omega_grid, dtype=float)
    s_ii, r_m = homodyne_spectrum(model, params, w, phi)
    # frequencies without transduction carry no force information: NaN, not an error
    with np.errstate(divide="ignore", invalid="ignore"):
        n_add = np.where(r_m >= R_MIN, s_ii / r_m, np.nan) - (model.n_th + 0.5)
    return SpectrumResult(omega_grid=w, phi=float(phi), s_ii=s_ii, r_m_phi=r_m,
                          n_add=n_add, s_ff=force_psd(params, n_add, model.n_th))


def spectrum_csv(result: SpectrumResult) -> str:
    cols = (result.omega_grid, result.s_ii, result.r_m_phi, result.n_add, result.s_ff)
    return csv_text(SPECTRUM_HEADER, zip(*cols))


def parse_spectrum_csv(text: str) -> dict[str, np.ndarray]:
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


def spectrum_sidecar(result: SpectrumResult, params: PhysicalParams, variant: str, **extra) -> str:
    meta = {"params": params.as_dict(), "variant": variant, "phi": result.phi,
            "code_version": __version__, "n_points": int(result.omega_grid.size)}
    meta.update(extra)
    return json_text(meta)
