"""Routh-Hurwitz classification of the drift matrix.

The characteristic polynomial det(lambda I - A) is obtained from the matrix
itself (Faddeev-LeVerrier) and the verdict is cross-checked against the
eigenvalues.  Both the recurrence and the Hurwitz minors run in exact integer
arithmetic: a float matrix is a dyadic rational, so 2^E A is an integer
matrix whose characteristic polynomial has integer coefficients.  Physical
drift matrices mix rates over many decades, and in floating point the
lowest coefficients (products of all eigenvalues) are lost to cancellation.
Reported Hurwitz determinants are those of A / ||A||_inf, rounded once.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"
ERROR = "error"

MARGINAL_RTOL = 1e-9


class StabilityConsistencyError(RuntimeError):
    """Routh-Hurwitz and eigenvalue verdicts disagree away from the boundary."""


@dataclass(frozen=True, eq=False)
class StabilityReport:
    coeffs: np.ndarray
    hurwitz: np.ndarray
    eigen_real_max: float
    verdict: str
    agreement: bool

    @property
    def stable(self) -> bool:
        return self.verdict == STABLE


def _to_integers(values):
    """Integers n_i = x_i 2^E for finite floats x_i, with one common E >= 0."""
    ratios = [float(x).as_integer_ratio() for x in values]
    E = max(d.bit_length() - 1 for _, d in ratios)
    return [n << (E - d.bit_length() + 1) for n, d in ratios], E


def _char_poly_int(B):
    """Exact Faddeev-LeVerrier on an integer matrix (list of rows)."""
    n = len(B)
    coeffs = [1]
    M = [[0] * n for _ in range(n)]
    for k in range(1, n + 1):
        for i in range(n):
            M[i][i] += coeffs[-1]
        BM = [[sum(B[i][t] * M[t][j] for t in range(n)) for j in range(n)] for i in range(n)]
        trace = sum(BM[i][i] for i in range(n))
        coeffs.append(-trace // k)
        M = BM
    return coeffs


def _det_int(M):
    """Exact determinant of an integer matrix (fraction-free Bareiss)."""
    M = [row[:] for row in M]
    n, sign, prev = len(M), 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            p = next((r for r in range(k + 1, n) if M[r][k] != 0), None)
            if p is None:
                return 0
            M[k], M[p] = M[p], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def _hurwitz_minors_int(coeffs):
    n = len(coeffs) - 1
    H = [[coeffs[2 * j - i + 1] if 0 <= 2 * j - i + 1 <= n else 0 for j in range(n)] for i in range(n)]
    return [_det_int([row[:k] for row in H[:k]]) for k in range(1, n + 1)]


def _exact_char_poly(A):
    """(integer coefficients of det(lambda I - 2^E A), E)."""
    A = np.asarray(A, dtype=float)
    ints, E = _to_integers(A.ravel())
    n = A.shape[0]
    return _char_poly_int([ints[i * n:(i + 1) * n] for i in range(n)]), E


def char_poly(drift: np.ndarray) -> np.ndarray:
    """Coefficients a_0..a_n of det(lambda I - A), with a_0 = 1, each rounded once."""
    b, E = _exact_char_poly(drift)
    return np.array([float(Fraction(c, 1 << (E * k))) for k, c in enumerate(b)])


def hurwitz_matrix(coeffs: np.ndarray) -> np.ndarray:
    a = np.asarray(coeffs, dtype=float)
    n = len(a) - 1
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            k = 2 * j - i + 1
            if 0 <= k <= n:
                H[i, j] = a[k]
    return H


def _scaled_minors(minors, unit):
    """Minors of the polynomial with lambda measured in ``unit``; the k-th
    minor has weight k(k+1)/2 in the coefficients."""
    u = Fraction(unit)
    return np.array([float(Fraction(m) / u ** ((k + 1) * (k + 2) // 2)) for k, m in enumerate(minors)])


def hurwitz_determinants(coeffs: np.ndarray) -> np.ndarray:
    """Leading principal minors Delta_1..Delta_n of the Hurwitz matrix (exact, rounded once)."""
    ints, E = _to_integers(coeffs)
    # a common factor 2^E on the coefficients enters Delta_k as 2^(E k)
    return np.array([float(Fraction(m, 1 << (E * (k + 1))))
                     for k, m in enumerate(_hurwitz_minors_int(ints))])


def routh_hurwitz_stable(coeffs: np.ndarray) -> bool:
    ints, _ = _to_integers(coeffs)
    return all(m > 0 for m in _hurwitz_minors_int(ints))


def routh_hurwitz_matrix_stable(drift: np.ndarray) -> bool:
    """Routh-Hurwitz verdict for a matrix, exact for its floating-point entries."""
    b, _ = _exact_char_poly(drift)
    return all(m > 0 for m in _hurwitz_minors_int(b))


def classify(drift) -> StabilityReport:
    """Stability report for a drift matrix (or anything with ``.drift``)."""
    A = np.asarray(getattr(drift, "drift", drift), dtype=float)
    scale = np.abs(A).sum(axis=1).max()
    if scale == 0.0:
        n = A.shape[0]
        coeffs = np.zeros(n + 1)
        coeffs[0] = 1.0
        return StabilityReport(coeffs, np.zeros(n), 0.0, MARGINAL, True)

    b, E = _exact_char_poly(A)
    coeffs = np.array([float(Fraction(c, 1 << (E * k))) for k, c in enumerate(b)])
    minors = _hurwitz_minors_int(b)
    rh = STABLE if all(m > 0 for m in minors) else UNSTABLE
    # lambda of the integer polynomial is 2^E lambda(A); report minors for A / scale
    hurwitz = _scaled_minors(minors, Fraction(1 << E) * Fraction(float(scale)))

    emax = float(np.linalg.eigvals(A).real.max())
    tol = MARGINAL_RTOL * scale
    if abs(emax) <= tol:
        return StabilityReport(coeffs, hurwitz, emax, MARGINAL, True)
    eig = STABLE if emax < 0 else UNSTABLE
    if eig != rh:
        raise StabilityConsistencyError(
            f"Routh-Hurwitz says {rh} but max Re(lambda) = {emax:.6e} "
            f"(tolerance {tol:.3e}); Hurwitz determinants {hurwitz}")
    return StabilityReport(coeffs, hurwitz, emax, rh, True)


def eigen_verdict(drift: np.ndarray) -> str:
    A = np.asarray(drift, dtype=float)
    tol = MARGINAL_RTOL * np.abs(A).sum(axis=1).max()
    emax = np.linalg.eigvals(A).real.max()
    if abs(emax) <= tol:
        return MARGINAL
    return STABLE if emax < 0 else UNSTABLE


def stability_map(params, axis1, axis2=None, variant: str = "full_kerr",
                  branch: str = "lowest", jobs: int = 1):
    """Per-cell verdicts over one or two sweep axes.

    Axes are :class:`magmech.sweep.Axis` values; the returned grid's
    ``status`` holds stable/unstable/marginal/error and ``stable`` is the
    boolean view.
    """
    from .sweep import SweepSpec, run_sweep

    axes = (axis1,) if axis2 is None else (axis1, axis2)
    spec = SweepSpec(axes=axes, metric="stability", variant=variant, branch=branch)
    return run_sweep(spec, params, jobs=jobs)
