"""Classical fixed point of the driven magnon-photon-phonon system.

Setting the time derivatives of the mean-field equations to zero and
eliminating Q_s gives, for the magnon number x = |m_s|^2,

    x * |(i D(x) + kappa_m/2)(i Delta_c + kappa_a/2) + g_ma^2|^2
        = Omega^2 * (Delta_c^2 + kappa_a^2/4),

with D(x) = Delta_m + (2K - g_mb^2/omega_b) x.  This is a real cubic in x;
each non-negative root fixes m_s, a_s and Q_s.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import PhysicalParams

RESIDUAL_RTOL = 1e-10
ROOT_RTOL = 1e-9


class SteadyStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class SteadyState:
    a_s: complex
    m_s: complex
    q_s: float
    n_m: float
    delta_m_eff: float
    branch: str
    residual: float


def _cavity_factor(p: PhysicalParams) -> complex:
    return complex(p.kappa_a / 2.0, p.delta_c)


def nonlinear_shift(p: PhysicalParams) -> float:
    """Net detuning shift per magnon: Kerr (2K) minus static mechanical pull."""
    return 2.0 * p.kerr_K - p.g_mb**2 / p.omega_b


def kerr_cubic(p: PhysicalParams) -> tuple[float, float, float, float]:
    """Coefficients (c3, c2, c1, c0) of c3 x^3 + c2 x^2 + c1 x + c0 = 0."""
    A = _cavity_factor(p)
    u = complex(p.kappa_m / 2.0, p.delta_m) * A + p.g_ma**2
    v = 1j * nonlinear_shift(p) * A
    c3 = abs(v) ** 2
    c2 = 2.0 * (u.conjugate() * v).real
    c1 = abs(u) ** 2
    c0 = -(p.drive_Omega**2) * abs(A) ** 2
    return c3, c2, c1, c0


def cubic_discriminant(c3, c2, c1, c0) -> float:
    """Positive when the cubic has three distinct real roots."""
    return (18 * c3 * c2 * c1 * c0 - 4 * c2**3 * c0 + c2**2 * c1**2
            - 4 * c3 * c1**3 - 27 * c3**2 * c0**2)


def _dominant_real_root(a: float, b: float, c: float) -> float:
    """Largest-magnitude real root of t^3 + a t^2 + b t + c (trig or Cardano form)."""
    q = (a * a - 3.0 * b) / 9.0
    r = (2.0 * a**3 - 9.0 * a * b + 27.0 * c) / 54.0
    if r * r < q**3:
        theta = math.acos(max(-1.0, min(1.0, r / math.sqrt(q**3))))
        s = -2.0 * math.sqrt(q)
        roots = [s * math.cos((theta + k * 2.0 * math.pi) / 3.0) - a / 3.0 for k in range(3)]
        t = max(roots, key=abs)
    else:
        big = -math.copysign(1.0, r) * np.cbrt(abs(r) + math.sqrt(r * r - q**3))
        small = q / big if big != 0.0 else 0.0
        t = big + small - a / 3.0
    for _ in range(4):
        f = ((t + a) * t + b) * t + c
        d = (3.0 * t + 2.0 * a) * t + b
        if d == 0.0 or f == 0.0:
            break
        t_new = t - f / d
        if abs(((t_new + a) * t_new + b) * t_new + c) >= abs(f):
            break
        t = t_new
    return t


def _monic_cubic_real_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of t^3 + a t^2 + b t + c.

    One real root comes from the closed form; the other two from the
    deflated quadratic t^2 + p t + q.  Its coefficients follow from Vieta's
    relations, choosing for p whichever relation cancels least, so that a
    complex pair lying close to the real axis is not misread as two real
    roots (or the reverse).
    """
    t1 = _dominant_real_root(a, b, c)
    if t1 == 0.0:
        return [0.0] + _quadratic_real_roots(1.0, a, b)
    q = -c / t1
    p_sum = a + t1
    p_prod = (q - b) / t1
    # compare cancellation factors (|a| + |t1|)/|p_sum| and (|q| + |b|)/|q - b|
    sum_better = (abs(a) + abs(t1)) * abs(q - b) <= (abs(q) + abs(b)) * abs(p_sum)
    p = p_sum if sum_better else p_prod
    return [t1] + _quadratic_real_roots(1.0, p, q)


def _quadratic_real_roots(a: float, b: float, c: float) -> list[float]:
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    qq = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = [qq / a] if a != 0 else []
    if qq != 0:
        roots.append(c / qq)
    return roots


def cubic_roots(c3: float, c2: float, c1: float, c0: float) -> list[float]:
    """Non-negative real roots, ascending, polished by Newton steps."""
    if c0 == 0.0:
        # undriven: the other factor |u + v x|^2 cannot vanish for a lossy system
        return [0.0]
    x0 = -c0 / c1  # root of the nonlinearity-free problem
    b3 = c3 * x0 * x0 / c1
    b2 = c2 * x0 / c1
    # P(y) = b3 y^3 + b2 y^2 + y - 1 with y = x / x0
    if b3 == 0.0 and b2 == 0.0:
        ys = [1.0]
    elif b3 == 0.0:
        ys = _quadratic_real_roots(b2, 1.0, -1.0)
    elif b3 <= 1.0:
        # weak nonlinearity: solve for z = 1/y, z^3 - z^2 - b2 z - b3 = 0
        ys = [1.0 / z for z in _monic_cubic_real_roots(-1.0, -b2, -b3) if z > 0]
    else:
        ys = _monic_cubic_real_roots(b2 / b3, 1.0 / b3, -1.0 / b3)

    def poly(y):
        return ((b3 * y + b2) * y + 1.0) * y - 1.0

    def dpoly(y):
        return (3.0 * b3 * y + 2.0 * b2) * y + 1.0

    polished = []
    for y in ys:
        if not math.isfinite(y):
            continue
        for _ in range(8):
            d = dpoly(y)
            if d == 0.0:
                break
            step = poly(y) / d
            y_new = y - step
            if abs(poly(y_new)) >= abs(poly(y)):
                break
            y = y_new
        # rounding near a fold can turn a complex pair into two spurious reals
        size = abs(b3 * y**3) + abs(b2 * y * y) + abs(y) + 1.0
        if y >= 0.0 and abs(poly(y)) <= ROOT_RTOL * size:
            polished.append(y * x0)
    polished.sort()
    # merge numerically coincident roots (double root at a fold)
    merged: list[float] = []
    for x in polished:
        if merged and abs(x - merged[-1]) <= 1e-12 * max(abs(x), 1e-300):
            continue
        merged.append(x)
    return merged


_LD = np.longdouble
_CLD = np.clongdouble


def _factored_parts(p: PhysicalParams):
    """Cavity factor A, net shift and drive target in extended precision."""
    A = _CLD(complex(p.kappa_a / 2.0, p.delta_c))
    shift = _LD(2.0) * _LD(p.kerr_K) - _LD(p.g_mb) ** 2 / _LD(p.omega_b)
    target = _LD(p.drive_Omega) ** 2 * (A.real**2 + A.imag**2)
    return A, shift, target


def _polish_factored(p: PhysicalParams, x: float):
    """Newton steps on  x |h(x)|^2 - Omega^2 |A|^2  without expanding h.

    The expanded cubic coefficients are rounded; near a fold that alone can
    leave |m(x)|^2 - x at the 1e-12 level, which the mean-field equations
    amplify through their large cancelling terms.  The steps run in extended
    precision where the platform provides it.
    """
    A, shift, target = _factored_parts(p)
    g2 = _LD(p.g_ma) ** 2

    def g(y):
        h = (_LD(p.kappa_m) / 2 + 1j * (_LD(p.delta_m) + shift * y)) * A + g2
        return y * (h.real**2 + h.imag**2) - target, h

    x = _LD(x)
    val, h = g(x)
    dh = 1j * shift * A
    for _ in range(8):
        d = h.real**2 + h.imag**2 + 2 * x * (h.conjugate() * dh).real
        if d == 0 or val == 0:
            break
        x_new = x - val / d
        val_new, h_new = g(x_new)
        if not (x_new >= 0 and abs(val_new) < abs(val)):
            break
        x, val, h = x_new, val_new, h_new
    return x


def _state_from_root(p: PhysicalParams, x: float, branch: str) -> SteadyState:
    A, _, _ = _factored_parts(p)
    x = _polish_factored(p, x)
    g_over = _LD(p.g_mb) / _LD(p.omega_b)
    d_eff = _LD(p.delta_m) - _LD(p.g_mb) * g_over * x + 2 * _LD(p.kerr_K) * x
    m = _LD(p.drive_Omega) * A / ((_LD(p.kappa_m) / 2 + 1j * d_eff) * A + _LD(p.g_ma) ** 2)
    n = m.real**2 + m.imag**2
    a = -1j * _LD(p.g_ma) * m / A
    d_eff = _LD(p.delta_m) - _LD(p.g_mb) * g_over * n + 2 * _LD(p.kerr_K) * n
    m_s = complex(m)
    n_m = abs(m_s) ** 2
    state = SteadyState(a_s=complex(a), m_s=m_s, q_s=-p.g_mb / p.omega_b * n_m, n_m=n_m,
                        delta_m_eff=float(d_eff), branch=branch, residual=0.0)
    return SteadyState(**{**state.__dict__, "residual": residual(p, state)})


def residual(p: PhysicalParams, state: SteadyState) -> float:
    """Max-norm mismatch of the mean-field equations at ``state``."""
    a, m, q = state.a_s, state.m_s, state.q_s
    n = abs(m) ** 2
    rhs_a = -complex(p.kappa_a / 2.0, p.delta_c) * a - 1j * p.g_ma * m
    rhs_m = (-complex(p.kappa_m / 2.0, p.delta_m) * m - 1j * p.g_mb * m * q
             - 1j * p.g_ma * a - 2j * p.kerr_K * n * m + p.drive_Omega)
    rhs_p = -p.omega_b * q - p.g_mb * n
    return float(max(abs(rhs_a), abs(rhs_m), abs(rhs_p)))


def residual_tolerance(p: PhysicalParams) -> float:
    return RESIDUAL_RTOL * max(p.drive_Omega, p.kappa_m)


def solve_steady_state(p: PhysicalParams) -> list[SteadyState]:
    """All steady states, ascending in |m_s|^2, with branch labels."""
    coeffs = kerr_cubic(p)
    roots = cubic_roots(*coeffs)
    if not roots:
        raise SteadyStateError(f"no non-negative root found; cubic coefficients {coeffs}")
    if len(roots) == 1:
        labels = ["unique"]
    elif len(roots) == 2:
        labels = ["lower", "upper"]
    else:
        labels = ["lower", "middle", "upper"]
    states = [_state_from_root(p, x, label) for x, label in zip(roots, labels)]
    tol = residual_tolerance(p)
    for s in states:
        if not s.residual <= tol:
            raise SteadyStateError(
                f"steady state residual {s.residual:.3e} exceeds {tol:.3e} "
                f"(x = {s.n_m:.6e}); cubic coefficients {coeffs}")
    return states


def select_branch(states: list[SteadyState], policy: str = "lowest") -> SteadyState:
    """Pick a state by policy: ``lowest``, ``highest`` or ``index:K``."""
    if policy == "lowest":
        return states[0]
    if policy == "highest":
        return states[-1]
    if policy.startswith("index:"):
        idx = int(policy.split(":", 1)[1])
        if not 0 <= idx < len(states):
            raise SteadyStateError(f"branch index {idx} out of range ({len(states)} states)")
        return states[idx]
    raise ValueError(f"unknown branch policy {policy!r}")


def drive_for_population(p: PhysicalParams, x: float) -> float:
    """Drive amplitude Omega whose steady state contains the root x = |m_s|^2.

    Exact inverse of the cubic; used to sweep cooperativity through the
    physical drive.
    """
    c3, c2, c1, _ = kerr_cubic(p.replace(drive_Omega=0.0))
    A2 = (p.delta_c**2 + p.kappa_a**2 / 4.0)
    return math.sqrt(x * ((c3 * x + c2) * x + c1) / A2)


def state_at_cooperativity(p: PhysicalParams, cooperativity: float) -> tuple[PhysicalParams, SteadyState]:
    """Drive and steady state realizing C = |G|^2/(kappa_m gamma_b).

    With |G|^2 = 2 g_mb^2 |m_s|^2 the target fixes x = |m_s|^2; the drive is
    then the exact inverse of the cubic and the returned state is the root
    that equals x, so Kerr and Q_s shifts stay self-consistent.
    """
    if p.g_mb == 0.0:
        raise ValueError("cooperativity cannot be set with g_mb = 0")
    if not cooperativity >= 0.0:
        raise ValueError(f"cooperativity must be >= 0 (got {cooperativity!r})")
    x = cooperativity * p.kappa_m * p.gamma_b / (2.0 * p.g_mb**2)
    q = p.replace(drive_Omega=drive_for_population(p, x))
    states = solve_steady_state(q)
    best = min(states, key=lambda s: abs(s.n_m - x))
    return q, best
