"""Linearized fluctuation dynamics around a steady state.

State vector  (dXa, dYa, dXm, dYm, dQ, dP)
Input vector  (Xa_in, Ya_in, Xm_in, Ym_in, xi_in)

The quadrature equations read  d/dt x = A x + B u,  with u white noise whose
symmetrized spectral matrix is ``noise_sym``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .params import DomainError, PhysicalParams
from .steady_state import SteadyState, residual, residual_tolerance

AS_PRINTED = "as_printed"
FULL_KERR = "full_kerr"
VARIANTS = (AS_PRINTED, FULL_KERR)

STATE_LABELS = ("Xa", "Ya", "Xm", "Ym", "Q", "P")
INPUT_LABELS = ("Xa_in", "Ya_in", "Xm_in", "Ym_in", "xi_in")

# <X Y> = i/2 for a vacuum input quadrature pair; the thermal force is classical
VACUUM_ANTISYM = np.zeros((5, 5), dtype=complex)
VACUUM_ANTISYM[0, 1] = VACUUM_ANTISYM[2, 3] = 0.5j
VACUUM_ANTISYM[1, 0] = VACUUM_ANTISYM[3, 2] = -0.5j


class StaleStateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LinearModel:
    drift: np.ndarray
    input: np.ndarray
    noise_sym: np.ndarray
    variant: str
    g_eff: complex
    n_th: float


def normalize_variant(variant: str) -> str:
    v = variant.replace("-", "_")
    if v not in VARIANTS:
        raise ValueError(f"unknown linearization variant {variant!r}")
    return v


def quadrature_block(alpha: complex, beta: complex = 0.0) -> np.ndarray:
    """Real 2x2 generator for  d(dc)/dt = alpha dc + beta dc^dagger.

    With dc = (X + iY)/sqrt(2) this maps to
    dX/dt = Re(alpha+beta) X - Im(alpha-beta) Y,
    dY/dt = Im(alpha+beta) X + Re(alpha-beta) Y.
    """
    s, d = alpha + beta, alpha - beta
    return np.array([[s.real, -d.imag], [s.imag, d.real]])


def thermal_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupancy of a mode at angular frequency ``omega``."""
    if temperature < 0:
        raise DomainError(f"bath_T must be >= 0 (got {temperature!r})")
    if temperature == 0:
        return 0.0
    x = constants.hbar * omega / (constants.k * temperature)
    return 1.0 / math.expm1(x)


def noise_correlations(p: PhysicalParams) -> np.ndarray:
    """Symmetrized, frequency-flat input spectral matrix (5x5).

    Vacuum 1/2 on the four cavity/magnon quadratures and n_th + 1/2 on the
    thermal force channel.
    """
    n_th = thermal_occupation(p.omega_b, p.bath_T)
    return np.diag([0.5, 0.5, 0.5, 0.5, n_th + 0.5])


def noise_correlations_raw(p: PhysicalParams) -> np.ndarray:
    """Non-symmetrized correlations <u_i[w] u_j[w']> = M_ij delta(w + w').

    The X/Y cross terms carry the +-i/2 of the vacuum inputs; M is Hermitian
    and its real part is :func:`noise_correlations`.
    """
    return noise_correlations(p) + VACUUM_ANTISYM


def build_model(p: PhysicalParams, state: SteadyState, variant: str = FULL_KERR) -> LinearModel:
    """Drift, input and noise matrices linearized about ``state``.

    ``full_kerr`` is the exact Jacobian of the mean-field equations; the Kerr
    term contributes a detuning 4K|m_s|^2 and a parametric coupling
    -2iK m_s^2 dm^dagger.  ``as_printed`` keeps only the steady-state Kerr
    detuning 2K|m_s|^2 in the magnon block.  Both use kappa_a for the cavity
    damping and omega_b in the mechanical rows.
    """
    variant = normalize_variant(variant)
    tol = residual_tolerance(p)
    res = residual(p, state)
    if not res <= tol:
        raise StaleStateError(f"state residual {res:.3e} exceeds tolerance {tol:.3e}")

    m_s = state.m_s
    n = abs(m_s) ** 2
    delta_bar = p.delta_m + p.g_mb * state.q_s
    g_eff = 1j * math.sqrt(2.0) * p.g_mb * m_s

    A = np.zeros((6, 6))
    A[0:2, 0:2] = quadrature_block(-complex(p.kappa_a / 2.0, p.delta_c))
    A[0:2, 2:4] = quadrature_block(-1j * p.g_ma)
    A[2:4, 0:2] = quadrature_block(-1j * p.g_ma)
    if variant == FULL_KERR:
        A[2:4, 2:4] = quadrature_block(-complex(p.kappa_m / 2.0, delta_bar + 4.0 * p.kerr_K * n),
                                       -2j * p.kerr_K * m_s**2)
    else:
        A[2:4, 2:4] = quadrature_block(-complex(p.kappa_m / 2.0, delta_bar + 2.0 * p.kerr_K * n))
    # magnetostrictive coupling with complex G resolved into quadratures
    A[2, 4] = -g_eff.real
    A[3, 4] = -g_eff.imag
    A[4, 5] = p.omega_b
    A[5, 4] = -p.omega_b
    A[5, 5] = -p.gamma_b
    A[5, 2] = -g_eff.imag
    A[5, 3] = g_eff.real

    B = np.zeros((6, 5))
    B[0, 0] = B[1, 1] = math.sqrt(p.kappa_a)
    B[2, 2] = B[3, 3] = math.sqrt(p.kappa_m)
    # the force channel carries n_th + 1/2, so the weight makes <dQ^2> = n_th + 1/2
    B[5, 4] = math.sqrt(2.0 * p.gamma_b)

    noise = noise_correlations(p)
    return LinearModel(drift=A, input=B, noise_sym=noise, variant=variant,
                       g_eff=complex(g_eff), n_th=float(noise[4, 4] - 0.5))


def cooperativity(model: LinearModel, p: PhysicalParams) -> float:
    """C = |G|^2 / (kappa_m gamma_b)."""
    return abs(model.g_eff) ** 2 / (p.kappa_m * p.gamma_b)


def diffusion_matrix(model: LinearModel) -> np.ndarray:
    return model.input @ model.noise_sym @ model.input.T
