"""Seeded random parameter sets and models shared by several test modules."""
import numpy as np

from magmech.linear_model import build_model
from magmech.params import TWO_PI, default_params
from magmech.stability import STABLE, classify
from magmech.steady_state import state_at_cooperativity


def random_params(rng, kerr=True, g_mb_zero=False):
    base = default_params()
    omega_b = TWO_PI * rng.uniform(1e6, 20e6)
    p = base.replace(
        omega_b=omega_b,
        kappa_a=TWO_PI * 10 ** rng.uniform(5.3, 6.5),
        kappa_m=TWO_PI * 10 ** rng.uniform(5.3, 6.5),
        gamma_b=omega_b * 10 ** rng.uniform(-4, -2),
        delta_c=omega_b * rng.uniform(-2, 2),
        delta_m=omega_b * rng.uniform(-2, 2),
        g_ma=TWO_PI * rng.uniform(0, 5e6),
        g_mb=0.0 if g_mb_zero else TWO_PI * rng.uniform(0.05, 1.0),
        kerr_K=TWO_PI * rng.uniform(0, 10e-9) if kerr else 0.0,
        bath_T=rng.uniform(0, 0.1),
    )
    return p


def random_stable_models(n, seed=0, variant="full_kerr", kerr=True):
    """``n`` (params, state, model) triples with stable fixed points."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = random_params(rng, kerr=kerr)
        q, s = state_at_cooperativity(p, 10 ** rng.uniform(-2, 3))
        m = build_model(q, s, variant)
        if classify(m).verdict == STABLE:
            out.append((q, s, m))
    return out
