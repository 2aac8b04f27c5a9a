import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants, linalg

import corpus
import oracles
from magmech import spectra as sp
from magmech.linear_model import LinearModel, build_model
from magmech.params import TWO_PI
from magmech.steady_state import solve_steady_state, state_at_cooperativity


def model_at(p, variant="full_kerr", branch=0):
    s = solve_steady_state(p)[branch]
    return build_model(p, s, variant)


def random_stable_matrix(rng, n=6, k=5):
    M = rng.normal(size=(n, n))
    A = M - (np.linalg.eigvals(M).real.max() + rng.uniform(0.2, 1.0)) * np.eye(n)
    return A, rng.normal(size=(n, k))


def fake_model(A, B):
    return LinearModel(drift=A, input=B, noise_sym=np.eye(B.shape[1]) / 2, variant="full_kerr",
                       g_eff=0j, n_th=0.0)


def test_single_mode_lorentzian(params):
    p = params.replace(g_ma=0.0, g_mb=0.0, kerr_K=0.0, delta_c=0.0)
    T = sp.transfer_matrix(model_at(p), 0.0)
    assert T[0, 0] == pytest.approx(2 / math.sqrt(p.kappa_a), rel=1e-14)
    assert abs(T[0, 1]) == 0 and abs(T[1, 0]) == 0
    w = 0.3 * p.kappa_a
    assert T.shape == (6, 5)
    assert sp.transfer_matrix(model_at(p), w)[0, 0] == pytest.approx(
        math.sqrt(p.kappa_a) / (p.kappa_a / 2 - 1j * w), rel=1e-14)


def test_zero_weight_channel_has_zero_column(params):
    m = model_at(params)
    B = m.input.copy()
    B[:, 2] = 0.0
    T = sp.transfer_matrix(fake_model(m.drift, B), np.linspace(0, 2 * params.omega_b, 7))
    assert not T[:, :, 2].any()
    assert np.abs(T[:, :4, 0]).min() > 0


def test_batched_transfer_matches_single(params):
    m = model_at(params)
    w = np.linspace(-3, 3, 11) * params.omega_b
    batch = sp.transfer_matrix(m, w)
    for k, wk in enumerate(w):
        np.testing.assert_allclose(batch[k], sp.transfer_matrix(m, wk), rtol=1e-14, atol=0)


def test_transfer_matches_impulse_response():
    rng = np.random.default_rng(11)
    for _ in range(5):
        A, B = random_stable_matrix(rng)
        m = fake_model(A, B)
        for w in np.logspace(-2, 1, 4):
            T = sp.transfer_matrix(m, w)
            ref = oracles.impulse_response_transfer(A, B, w)
            assert np.abs(T - ref).max() <= 1e-6 * np.abs(ref).max()


def test_singular_system():
    A = np.zeros((6, 6))
    A[0, 1], A[1, 0] = 1.0, -1.0
    with pytest.raises(sp.SingularSystemError):
        sp.transfer_matrix(fake_model(A, np.eye(6, 5)), 1.0)


def test_resonant_reflection_and_high_frequency_limit(params):
    p = params.replace(g_ma=0.0, g_mb=0.0, kerr_K=0.0, delta_c=0.0)
    O = sp.output_transfer(model_at(p), p, 0.0)
    assert O[0, 0] == pytest.approx(1.0, rel=1e-14)
    far = sp.output_transfer(model_at(params), params, 1e6 * params.kappa_a)
    np.testing.assert_allclose(far, -np.eye(4, 5), atol=1e-5)


def test_passive_vacuum_preservation():
    rng = np.random.default_rng(12)
    for _ in range(10):
        p = corpus.random_params(rng, kerr=False, g_mb_zero=True).replace(
            drive_Omega=10 ** rng.uniform(10, 15))
        m = model_at(p)
        w = np.linspace(-3, 3, 200) * p.omega_b
        for phi in rng.uniform(0, math.pi, 3):
            s_ii, r_m = sp.homodyne_spectrum(m, p, w, phi)
            assert np.abs(s_ii - 0.5).max() <= 1e-9
            assert not r_m.any()


def test_spectrum_forms_are_nonnegative_even_and_pi_periodic():
    for q, _, m in corpus.random_stable_models(8, seed=13):
        w = np.linspace(0.0, 2.5, 41) * q.omega_b
        for phi in (0.0, 0.7, 2.0):
            s, r = sp.homodyne_spectrum(m, q, w, phi)
            s2, r2 = sp.homodyne_spectrum(m, q, w, phi + math.pi)
            sm, rm = sp.homodyne_spectrum(m, q, -w, phi)
            assert (s > 0).all() and (r >= 0).all()
            np.testing.assert_allclose(s2, s, rtol=1e-12)
            np.testing.assert_allclose(r2, r, rtol=1e-12, atol=1e-300)
            np.testing.assert_allclose(sm, s, rtol=1e-12)
            np.testing.assert_allclose(rm, r, rtol=1e-10, atol=1e-14 * r.max())


def test_lyapunov_oracle():
    for _, _, m in corpus.random_stable_models(6, seed=14):
        V = oracles.lyapunov_covariance(m)
        got = oracles.integrated_spectra(m)
        np.testing.assert_allclose(got, np.diag(V), rtol=1e-6)


def test_unstable_model_is_rejected(bistable):
    m = model_at(bistable, branch=1)
    with pytest.raises(sp.UnstableModelError, match="spectrum undefined for unstable fixed point"):
        sp.homodyne_spectrum(m, bistable, bistable.omega_b, 0.0)
    with pytest.raises(sp.UnstableModelError):
        sp.optimize_homodyne(m, bistable)


def test_no_transduction(params):
    p = params.replace(g_mb=0.0)
    with pytest.raises(sp.NoTransductionError, match="no mechanical transduction"):
        sp.added_noise(model_at(p), p, p.omega_b, 0.3)
    res = sp.compute_spectrum(model_at(p), p, [p.omega_b], 0.3)
    assert np.isnan(res.n_add).all() and np.isnan(res.s_ff).all()


def test_added_noise_definition(params):
    m = model_at(params)
    w = np.array([0.9, 1.0, 1.1]) * params.omega_b
    s, r = sp.homodyne_spectrum(m, params, w, 0.4)
    np.testing.assert_allclose(sp.added_noise(m, params, w, 0.4), s / r - (m.n_th + 0.5), rtol=1e-15)


def angle_forms_from_public_api(m, p, w):
    s0, r0 = sp.homodyne_spectrum(m, p, w, 0.0)
    s1, r1 = sp.homodyne_spectrum(m, p, w, math.pi / 2)
    s2, r2 = sp.homodyne_spectrum(m, p, w, math.pi / 4)
    S = np.array([[s0, s2 - (s0 + s1) / 2], [s2 - (s0 + s1) / 2, s1]])
    R = np.array([[r0, r2 - (r0 + r1) / 2], [r2 - (r0 + r1) / 2, r1]])
    return S, R


def test_optimum_matches_generalized_eigenproblem():
    checked = 0
    for q, _, m in corpus.random_stable_models(20, seed=15):
        S, R = angle_forms_from_public_api(m, q, q.omega_b)
        if np.linalg.eigvalsh(R).min() <= 1e-9 * np.trace(R):
            continue
        lam, vec = linalg.eigh(S, R)
        expected = lam[0] - (m.n_th + 0.5)
        phi, n_add = sp.optimize_homodyne(m, q)
        assert n_add == pytest.approx(expected, rel=1e-9, abs=1e-12)
        checked += 1
    assert checked >= 10


def test_optimum_matches_dense_grid(params):
    grid = np.linspace(0, math.pi, 100000, endpoint=False)
    for p in (params.replace(kerr_K=0.0), params.replace(kerr_K=0.0, bath_T=0.0)):
        m = model_at(p)
        values = sp.added_noise(m, p, p.omega_b, grid)
        phi, n_add = sp.optimize_homodyne(m, p)
        ref = grid[int(np.argmin(values))]
        d = abs(phi - ref)
        assert min(d, math.pi - d) <= 1e-4
        assert n_add <= values.min() + 1e-12


def test_optimum_is_minimal_and_periodic():
    for q, _, m in corpus.random_stable_models(10, seed=16):
        try:
            phi, n_add = sp.optimize_homodyne(m, q)
        except sp.NoTransductionError:
            continue
        assert 0 <= phi < math.pi
        for trial in (0.0, math.pi / 4, math.pi / 2):
            try:
                assert n_add <= sp.added_noise(m, q, q.omega_b, trial) + 1e-12 * abs(n_add)
            except sp.NoTransductionError:
                pass
        assert sp.added_noise(m, q, q.omega_b, phi + math.pi) == pytest.approx(
            sp.added_noise(m, q, q.omega_b, phi), rel=1e-10)


def test_force_psd_floor_and_scaling(params):
    p = params.replace(bath_T=0.0)
    assert sp.force_psd(p, 0.0, 0.0) == pytest.approx(
        constants.hbar * p.m_eff * p.gamma_b * p.omega_b, rel=1e-15)
    n_add = np.array([0.1, 1.0, 7.0])
    np.testing.assert_allclose(sp.force_psd(p.replace(m_eff=2 * p.m_eff), n_add, 0.3),
                               2 * sp.force_psd(p, n_add, 0.3), rtol=1e-15)


@given(st.floats(0.0, 10.0), st.floats(0.0, 1e4))
def test_force_psd_affine(n_add, n_th):
    from magmech.params import default_params
    p = default_params()
    pref = 2 * constants.hbar * p.m_eff * p.gamma_b * p.omega_b
    assert sp.force_psd(p, n_add, n_th) == pytest.approx(pref * (n_th + 0.5 + n_add), rel=1e-14)


def test_force_psd_temperature_trend(params):
    from magmech.linear_model import thermal_occupation
    Ts = np.linspace(0.0, 2.0, 41)
    s = [sp.force_psd(params, 0.3, thermal_occupation(params.omega_b, T)) for T in Ts]
    assert all(a < b for a, b in zip(s, s[1:]))


def test_sql_baseline_default(params):
    b = sp.sql_baseline(params)
    assert b.n_add_sql == 0.5
    assert b.omega == params.omega_b
    assert b.n_add_min >= 0.5 * (1 - 1e-2)
    assert sp.sql_baseline(params.replace(kerr_K=TWO_PI * 3e-9)) == b
    assert sp.sql_baseline(params, "as_printed").c_sql == pytest.approx(b.c_sql, rel=1e-12)
    for factor in (0.1, 10.0):
        n, _ = sp.optimal_noise_at_cooperativity(params.replace(kerr_K=0.0), factor * b.c_sql)
        assert n > 3
    for factor in (0.8, 1.25):
        n, _ = sp.optimal_noise_at_cooperativity(params.replace(kerr_K=0.0), factor * b.c_sql)
        assert n >= b.n_add_min


def test_sql_baseline_scan_refinement(params):
    coarse = sp.sql_baseline(params)
    fine = sp.sql_baseline(params, points_per_decade=8)
    assert fine.c_sql == pytest.approx(coarse.c_sql, rel=1e-4)


def test_sql_reached_by_near_ideal_readout(params):
    p = params.replace(**oracles.NEAR_IDEAL)
    b = sp.sql_baseline(p)
    n, _ = sp.optimal_noise_at_cooperativity(p.replace(kerr_K=0.0), b.c_sql)
    assert n == pytest.approx(0.5, rel=1e-2)
    assert n >= 0.5 * (1 - 1e-9)


def test_sql_scan_without_interior_minimum(params):
    with pytest.raises(sp.ScanError):
        sp.sql_baseline(params, c_range=(1e-4, 1.0))


def test_asymptotic_slopes(params):
    p = params.replace(kerr_K=0.0)
    c_sql = sp.sql_baseline(p).c_sql

    def slope(c):
        a = sp.optimal_noise_at_cooperativity(p, c)[0]
        b = sp.optimal_noise_at_cooperativity(p, 1.1 * c)[0]
        return math.log(b / a) / math.log(1.1)

    assert slope(1e-3 * c_sql) == pytest.approx(-1.0, abs=0.05)
    assert slope(1e3 * c_sql) == pytest.approx(1.0, abs=0.05)


def test_backaction_grows_with_cooperativity(params):
    p = params.replace(kerr_K=0.0)
    cs = np.logspace(3, 4, 5)
    ns = [sp.optimal_noise_at_cooperativity(p, c)[0] for c in cs]
    assert all(a < b for a, b in zip(ns, ns[1:]))


def test_compute_spectrum_and_csv_round_trip(params):
    m = model_at(params)
    w = np.linspace(0.9, 1.1, 21) * params.omega_b
    res = sp.compute_spectrum(m, params, w, 0.25)
    np.testing.assert_allclose(res.s_ff, sp.force_psd(params, res.n_add, m.n_th), rtol=1e-15)
    text = sp.spectrum_csv(res)
    assert text.splitlines()[0] == ",".join(sp.SPECTRUM_HEADER)
    back = sp.parse_spectrum_csv(text)
    for name, arr in zip(sp.SPECTRUM_HEADER, (res.omega_grid, res.s_ii, res.r_m_phi, res.n_add, res.s_ff)):
        np.testing.assert_array_equal(back[name], arr)
    import json
    meta = json.loads(sp.spectrum_sidecar(res, params, "full_kerr"))
    assert meta["phi"] == 0.25 and meta["params"]["g_mb"] == params.g_mb


@settings(max_examples=30, deadline=None)
@given(st.floats(-2.0, 2.0))
def test_state_at_cooperativity_spectrum_is_real(logc):
    from magmech.params import default_params
    q, s = state_at_cooperativity(default_params().replace(kerr_K=0.0), 10**logc)
    m = build_model(q, s)
    s_ii, r = sp.homodyne_spectrum(m, q, q.omega_b, 0.5)
    assert np.isfinite(s_ii) and np.isfinite(r) and s_ii > 0
