"""Physical parameters of the cavity-magnomechanical sensor.

All frequencies, rates and couplings are stored in angular units (rad/s).
Configuration files may give them as ordinary frequencies by appending
``_hz_over_2pi`` to the key; see :mod:`magmech.config`.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi
MU0 = 4e-7 * math.pi

# Fields of PhysicalParams that carry angular-frequency units.
ANGULAR_FIELDS = (
    "omega_a",
    "omega_m",
    "omega_b",
    "delta_c",
    "delta_m",
    "kappa_a",
    "kappa_m",
    "gamma_b",
    "g_ma",
    "g_mb",
    "kerr_K",
    "drive_Omega",
)


class DomainError(ValueError):
    """Raised when an input lies outside the physical domain of a formula."""


class ParameterError(ValueError):
    """Raised by :func:`validate`; ``errors`` lists every violated invariant."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class PhysicalParams:
    omega_a: float
    omega_m: float
    omega_b: float
    delta_c: float
    delta_m: float
    kappa_a: float
    kappa_m: float
    gamma_b: float
    g_ma: float
    g_mb: float
    kerr_K: float
    drive_Omega: float
    bath_T: float
    m_eff: float

    def replace(self, **changes) -> "PhysicalParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def default_params() -> PhysicalParams:
    """Reference configuration used by the CLI and the figure sweeps.

    Typical cavity-magnomechanics magnitudes; ``g_ma`` and ``g_mb`` are the
    couplings quoted for the added-noise figures, the rest are choices.
    The drive puts the K = 0 system close to its SQL cooperativity.
    """
    return PhysicalParams(
        omega_a=TWO_PI * 10e9,
        omega_m=TWO_PI * 10e9,
        omega_b=TWO_PI * 10e6,
        delta_c=TWO_PI * 10e6,
        delta_m=TWO_PI * 10e6,
        kappa_a=TWO_PI * 1e6,
        kappa_m=TWO_PI * 1e6,
        gamma_b=TWO_PI * 100.0,
        g_ma=TWO_PI * 3.2e6,
        g_mb=TWO_PI * 0.2,
        kerr_K=0.0,
        drive_Omega=TWO_PI * 1.6e12,
        bath_T=10e-3,
        m_eff=10e-12,
    )


def validate(params: PhysicalParams) -> PhysicalParams:
    """Return ``params`` unchanged if every invariant holds.

    Raises :class:`ParameterError` carrying the full list of violations,
    each message naming the offending field.
    """
    errors = []
    for name in ("kappa_a", "kappa_m", "gamma_b", "m_eff", "omega_b", "omega_m"):
        value = getattr(params, name)
        if not (math.isfinite(value) and value > 0):
            errors.append(f"{name} must be > 0 (got {value!r})")
    for name in ("kerr_K", "drive_Omega", "bath_T"):
        value = getattr(params, name)
        if not (math.isfinite(value) and value >= 0):
            errors.append(f"{name} must be >= 0 (got {value!r})")
    for name in ("omega_a", "delta_c", "delta_m", "g_ma", "g_mb"):
        value = getattr(params, name)
        if not math.isfinite(value):
            errors.append(f"{name} must be finite (got {value!r})")
    if errors:
        raise ParameterError(errors)
    return params


@dataclass(frozen=True)
class MaterialGeometry:
    """YIG sphere geometry and material constants (SI units)."""

    diameter_D: float
    saturation_M: float
    anisotropy_Kan: float
    field_B0: float = 0.0
    spin_density_rho: float = 4.22e27
    gyromagnetic_gamma: float = TWO_PI * 28e9

    @property
    def volume(self) -> float:
        return math.pi * self.diameter_D**3 / 6.0


def _check_geometry(geom: MaterialGeometry) -> None:
    for name in ("diameter_D", "saturation_M", "anisotropy_Kan",
                 "spin_density_rho", "gyromagnetic_gamma"):
        value = getattr(geom, name)
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be > 0 (got {value!r})")


def derive_kerr(geom: MaterialGeometry) -> float:
    """Magnon Kerr strength K = mu0 K_an gamma^2 / (M^2 V) in rad/s.

    V = pi D^3 / 6 is the sphere volume, so K scales exactly as D^-3.
    """
    _check_geometry(geom)
    return (MU0 * geom.anisotropy_Kan * geom.gyromagnetic_gamma**2
            / (geom.saturation_M**2 * geom.volume))


def derive_drive(geom: MaterialGeometry) -> float:
    """Drive amplitude Omega = sqrt(5) gamma sqrt(N) B0 / 4 with N = rho V."""
    _check_geometry(geom)
    if not (math.isfinite(geom.field_B0) and geom.field_B0 >= 0):
        raise DomainError(f"field_B0 must be >= 0 (got {geom.field_B0!r})")
    n_spins = geom.spin_density_rho * geom.volume
    return math.sqrt(5.0) * geom.gyromagnetic_gamma * math.sqrt(n_spins) * geom.field_B0 / 4.0
