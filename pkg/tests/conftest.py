"""Shared builders for the test suite."""

import numpy as np
import pytest

from biphospec import matter, probe, scatter


def orthonormal_envelopes(grid, K, rng, center_span=12.0):
    """K random orthonormal envelopes built from Hermite-Gauss superpositions."""
    base = probe.hermite_gauss_family(K + 4, (grid.t - center_span * rng.random())
                                      / (1.5 + rng.random()))
    coef = rng.normal(size=(K, K + 4)) + 1j * rng.normal(size=(K, K + 4))
    raw = coef @ base
    w = np.sqrt(grid.weights)
    q, _ = np.linalg.qr((raw * w).T)
    modes = q.T / w
    return [probe.Envelope(grid, modes[k].astype(complex)) for k in range(K)]


def random_scattered_state(rng, K=None, gamma_perp_ratio=None, theta=None,
                           n=4096, keep_fields=False):
    """Random biphoton ScatteredState (no vacuum) off a random TLS."""
    K = K if K is not None else int(rng.integers(2, 9))
    grid = probe.TimeGrid(-30.0, 220.0, n)
    envs = orthonormal_envelopes(grid, K, rng)
    r = (rng.random(K) + 0.25).astype(complex)
    r *= np.exp(2j * np.pi * rng.random(K))
    r /= np.sqrt(np.sum(np.abs(r) ** 2))
    src = probe.SchmidtState(r=r, signal_modes=envs, idler_modes=envs)
    gam = 0.1 + 0.3 * rng.random()
    if gamma_perp_ratio is None:
        gamma_perp_ratio = float(rng.choice([0.0, 0.3, 1.0]))
    ms = matter.tls(gamma=gam, delta=(rng.random() - 0.5) * 4 * gam,
                    gamma_perp=gamma_perp_ratio * gam)
    theta = theta or str(rng.choice(["gamma", "omega0"]))
    return scatter.scatter_schmidt(src, ms, theta, keep_fields=keep_fields)


def haar_unitary(K, rng):
    z = rng.normal(size=(K, K)) + 1j * rng.normal(size=(K, K))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def pdc_scattered(sigma_cm, T_qent, theta="gamma", gamma=0.15, gamma_perp=0.0,
                  n=2 ** 14, cap=64, convention="ordinary", postselect=False,
                  delta=0.0):
    """Scattered PDC state at one pump-grid point (TLS matter)."""
    sig = probe.wavenumber_to_radps(sigma_cm, convention)
    jsa = probe.pdc_gaussian_jsa(sig, T_qent)
    fac = probe.schmidt_factors(jsa)
    ms = matter.tls(gamma=gamma, delta=delta, gamma_perp=gamma_perp)
    grid = probe.default_grid(ms.gamma, fac.kappa_s, fac.kappa_i, n=n)
    state, _ = probe.pdc_schmidt(jsa, grid, cap=cap)
    if postselect:
        state = state.postselect()
    return state, scatter.scatter_schmidt(state, ms, theta, keep_fields=False)


def random_density_pair(rng, dim):
    """Random full-rank (rho, drho): PSD unit trace and Hermitian traceless."""
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T + 0.05 * np.eye(dim)
    rho /= np.trace(rho).real
    b = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    drho = b + b.conj().T
    drho -= np.trace(drho).real / dim * np.eye(dim)
    return rho, drho


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
