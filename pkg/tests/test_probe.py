"""Probe construction: envelopes, JSA, Schmidt machinery."""

import numpy as np
import pytest

from biphospec import probe
from biphospec.probe import (GridTooShortError, TimeGrid, entanglement_entropy,
                             hermite_gauss, make_envelope, pdc_gaussian_jsa,
                             pdc_schmidt, reconstruct_jsa, schmidt_factors,
                             tfm_state, wavenumber_to_radps)


def test_exponential_normalization():
    grid = TimeGrid(0.0, 40.0, 4001)
    env = make_envelope("exponential", {"tau": 1.0}, grid)
    assert abs(env.norm_sq() - 1.0) < 1e-8


def test_gaussian_peak_value():
    grid = TimeGrid(-10.0, 20.0, 4001)
    env = make_envelope("gaussian", {"tau": 1.0, "t_ar": 5.0}, grid)
    peak = np.abs(env.amp).max()
    assert abs(peak - np.pi ** -0.25) < 1e-6
    i_peak = np.argmax(np.abs(env.amp))
    assert abs(grid.t[i_peak] - 5.0) < grid.dt


def test_hermite_gauss_orthogonality():
    grid = TimeGrid(-25.0, 25.0, 4001)
    h0 = make_envelope("hermite_gauss", {"n": 0, "k": 1.3}, grid)
    h1 = make_envelope("hermite_gauss", {"n": 1, "k": 1.3}, grid)
    assert abs(h0.overlap(h1)) < 1e-8
    assert abs(h1.norm_sq() - 1.0) < 1e-8


def test_grid_too_short_raises():
    grid = TimeGrid(0.0, 2.0, 201)  # truncates the tau=1 exponential badly
    with pytest.raises(GridTooShortError):
        make_envelope("exponential", {"tau": 1.0}, grid)
    with pytest.raises(ValueError):
        make_envelope("sawtooth", {"tau": 1.0}, grid)


def test_square_envelope_support():
    grid = TimeGrid(0.0, 5.0, 5001)
    env = make_envelope("square", {"tau": 2.0}, grid)
    t = grid.t
    assert np.all(np.abs(env.amp[t > 2.01]) == 0)
    assert abs(env.norm_sq() - 1.0) < 1e-12
    with pytest.raises(GridTooShortError):
        make_envelope("square", {"tau": 7.0}, grid)


def test_jsa_coefficients_match_pump_and_phase_matching():
    # sigma_p = 1 rad/ps, T_qent = 1 ps: a = 0.5 + gamma * 0.12^2
    jsa = pdc_gaussian_jsa(1.0, 1.0)
    assert abs(jsa.a - (0.5 + 0.04822 * 0.12 ** 2)) < 1e-12
    assert abs(jsa.b - (0.5 + 0.04822 * 0.12 * 1.12)) < 1e-12
    assert abs(jsa.c - (0.5 + 0.04822 * 1.12 ** 2)) < 1e-12


def test_jsa_large_pump_limit():
    # pump term vanishes as sigma_p -> inf
    jsa = pdc_gaussian_jsa(1e6, 2.0)
    g = 0.04822
    assert abs(jsa.a - g * (0.12 * 2) ** 2) < 1e-9
    assert abs(jsa.c - g * (1.12 * 2) ** 2) < 1e-9


@pytest.mark.parametrize("sigma_p,T", [(1.0, 1.0), (3.0, 0.5), (12.0, 2.0)])
def test_jsa_ellipticity_identity(sigma_p, T):
    # ac - b^2 = gamma (T_S - T_I)^2 / (2 sigma_p^2) > 0
    jsa = pdc_gaussian_jsa(sigma_p, T)
    expected = 0.04822 * T ** 2 / (2 * sigma_p ** 2)
    assert abs((jsa.a * jsa.c - jsa.b ** 2) - expected) < 1e-12 * expected + 1e-15


def test_schmidt_product_limit_single_mode():
    # b -> 0 is a product JSA: mu = 0, one Schmidt mode
    jsa = probe.GaussianJSA(a=0.3, b=0.0, c=0.2, alpha_over_hbar=0.01,
                            sigma_p=1.0, T_S=0.1, T_I=1.0, T_qent=1.0)
    fac = schmidt_factors(jsa)
    assert fac.mu == 0.0
    assert fac.n_modes_for() == 1


def test_schmidt_symmetric_kappas():
    jsa = probe.GaussianJSA(a=0.25, b=0.1, c=0.25, alpha_over_hbar=0.01,
                            sigma_p=1.0, T_S=0.1, T_I=1.0, T_qent=1.0)
    fac = schmidt_factors(jsa)
    assert abs(fac.kappa_s - fac.kappa_i) < 1e-14


def test_schmidt_weights_norm_matches_jsa_l2():
    # sum |r_n|^2 equals the squared L2 norm of the Gaussian JSA
    jsa = pdc_gaussian_jsa(wavenumber_to_radps(80.0), 0.9)
    fac = schmidt_factors(jsa)
    lam_analytic = jsa.alpha_over_hbar ** 2 / (
        4 * jsa.sigma_p ** 2 * np.sqrt(jsa.a * jsa.c - jsa.b ** 2))
    lam_schmidt = abs(fac.r0) ** 2 / (1 - fac.mu ** 2)
    assert abs(lam_schmidt - lam_analytic) < 1e-12 * lam_analytic


def test_mehler_reconstruction_l2():
    # direct-summation oracle on a 128x128 frequency grid
    jsa = pdc_gaussian_jsa(wavenumber_to_radps(100.0), 0.6)
    fac = schmidt_factors(jsa)
    n_modes = fac.n_modes_for(1e-8, cap=None)
    ws = np.linspace(-6 / fac.kappa_s, 6 / fac.kappa_s, 128)
    wi = np.linspace(-6 / fac.kappa_i, 6 / fac.kappa_i, 128)
    WS, WI = np.meshgrid(ws, wi, indexing="ij")
    target = jsa.value(WS, WI)
    rec = reconstruct_jsa(fac, n_modes, ws, wi)
    dws, dwi = ws[1] - ws[0], wi[1] - wi[0]
    err = np.sqrt(np.sum(np.abs(rec - target) ** 2) * dws * dwi)
    assert err < 1e-6


def test_mu_monotone_in_pump_width():
    T = 0.8
    mus = [abs(schmidt_factors(pdc_gaussian_jsa(wavenumber_to_radps(s), T)).mu)
           for s in np.linspace(50, 180, 8)]
    assert all(m1 > m2 for m1, m2 in zip(mus, mus[1:]))


def test_pdc_schmidt_modes_orthonormal():
    jsa = pdc_gaussian_jsa(wavenumber_to_radps(120.0), 0.5)
    fac = schmidt_factors(jsa)
    grid = probe.default_grid(0.15, fac.kappa_s, fac.kappa_i, n=8192)
    state, _ = pdc_schmidt(jsa, grid)
    for which in ("signal", "idler"):
        gram = state.mode_gram(which)
        assert np.max(np.abs(gram - np.eye(state.n_modes))) < 1e-6
    assert state.has_vacuum
    assert abs(state.norm_const - (1 + np.sum(np.abs(state.r) ** 2))) < 1e-12


def test_time_frequency_duality():
    # FT of the frequency mode sqrt(k) h_n(k w) is (-i)^n h_n(t/k)/sqrt(k)
    k = 1.3
    w = np.linspace(-9.0, 9.0, 3001)
    dw = w[1] - w[0]
    t = np.linspace(-11.0, 11.0, 901)
    for n in (0, 1, 2, 5):
        freq = np.sqrt(k) * hermite_gauss(n, k * w)
        ft = (freq[None, :] * np.exp(-1j * np.outer(t, w))).sum(axis=1) * dw / np.sqrt(2 * np.pi)
        ref = (-1j) ** n * hermite_gauss(n, t / k) / np.sqrt(k)
        assert np.max(np.abs(ft - ref)) < 1e-8


def test_entropy_single_mode_zero():
    st = probe.SchmidtState(r=np.array([0.3 + 0j]), signal_modes=[None], idler_modes=[None])
    assert entanglement_entropy(st) == 0.0


def test_entropy_geometric_weights():
    # p_n = (1 - mu^2) mu^(2n) with mu^2 = 1/2 has S = 2 log 2
    p = 0.5 * 0.5 ** np.arange(80)
    st = probe.SchmidtState(r=np.sqrt(p).astype(complex), signal_modes=[None], idler_modes=[None])
    assert abs(entanglement_entropy(st) - 2 * np.log(2)) < 1e-12


def test_entropy_two_equal_weights():
    st = probe.SchmidtState(r=np.array([0.1 + 0j, 0.1 + 0j]), signal_modes=[None, None],
                            idler_modes=[None, None])
    assert abs(entanglement_entropy(st) - np.log(2)) < 1e-14


def test_entropy_all_zero_raises():
    st = probe.SchmidtState(r=np.array([0.0 + 0j]), signal_modes=[None], idler_modes=[None])
    with pytest.raises(ValueError):
        entanglement_entropy(st)


def test_tfm_endpoints_and_balanced_angle():
    grid = TimeGrid(-40.0, 40.0, 4001)
    st0 = tfm_state(0.0, grid)
    assert st0.n_modes == 1 and st0.signal_modes[0].kind == "hermite_gauss"
    st_mid = tfm_state(np.pi / 4, grid)
    assert abs(entanglement_entropy(st_mid) - np.log(2)) < 1e-12
    st_end = tfm_state(np.pi / 2, grid)
    assert st_end.n_modes == 1
    # the surviving term at t = pi/2 pairs signal mode 1 with idler mode 0
    h1 = make_envelope("hermite_gauss", {"n": 1, "k": 1.3}, grid)
    assert abs(abs(st_end.signal_modes[0].overlap(h1)) - 1.0) < 1e-8
    with pytest.raises(ValueError):
        tfm_state(3.5, grid)


def test_wavenumber_conventions():
    assert abs(wavenumber_to_radps(50.0, "ordinary") - 50 * 0.0299792458) < 1e-12
    assert abs(wavenumber_to_radps(50.0, "angular") - 2 * np.pi * 50 * 0.0299792458) < 1e-10
    with pytest.raises(ValueError):
        wavenumber_to_radps(50.0, "bogus")
