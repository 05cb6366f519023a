"""Matter systems and characteristic response functions."""

import numpy as np
import pytest

from biphospec import matter
from biphospec.matter import (MatterSystem, apc_dimer, char_fn, char_fn_deriv,
                              coupled_dimer, excitonic, expm2, tls)
from biphospec.probe import EV_TO_RADPS


def test_tls_char_fn_values():
    ms = tls(gamma=0.15, delta=0.0)
    assert abs(char_fn(ms, 0.0) - 1.0) < 1e-15
    # decay rate Gamma/2 = 0.075: f(1/0.075) = e^-1
    assert abs(char_fn(ms, 1 / 0.075) - np.exp(-1)) < 1e-12
    with pytest.raises(ValueError):
        char_fn(ms, -1.0)


def test_tls_derivatives_closed_form():
    ms = tls(gamma=0.15, delta=0.0)
    t = 1.0
    f = char_fn(ms, t)
    assert abs(char_fn_deriv(ms, "omega0", t) - (-1j * t * f)) < 1e-14
    assert abs(char_fn_deriv(ms, "gamma", t) - (-0.5 * t * f)) < 1e-14
    assert abs(char_fn_deriv(ms, "omega0", 1.0) - (-1j * np.exp(-0.075))) < 1e-12


def test_param_compatibility():
    ms = tls(gamma=0.1)
    with pytest.raises(ValueError):
        char_fn_deriv(ms, "J", 1.0)
    msd = apc_dimer()
    with pytest.raises(ValueError):
        char_fn_deriv(msd, "omega0", 1.0)


def test_excitonic_no_mixing():
    ms = coupled_dimer(gamma=0.1, omega_a=10.0, omega_b=5.0, J=0.0,
                       dip_a=1.0, dip_b=0.7, omega_bar_s=10.0)
    exc = excitonic(ms)
    assert exc.theta == 0.0
    assert abs(exc.lambda_alpha - 1.0) < 1e-14
    assert abs(exc.lambda_beta - 0.7) < 1e-14
    assert abs(exc.omega_alpha - 10.0) < 1e-12
    assert abs(exc.omega_beta - 5.0) < 1e-12


def test_excitonic_homodimer_negative_j():
    ms = coupled_dimer(gamma=0.1, omega_a=8.0, omega_b=8.0, J=-0.5,
                       dip_a=1.0, dip_b=0.6, omega_bar_s=8.0)
    exc = excitonic(ms)
    assert abs(exc.theta + np.pi / 4) < 1e-14
    assert abs(exc.lambda_alpha - (1.0 - 0.6) / np.sqrt(2)) < 1e-14
    # antisymmetric combination sits above the mean for J < 0
    assert exc.omega_alpha > exc.omega_beta


def test_excitonic_apc_parameters():
    exc = excitonic(apc_dimer())
    assert abs(exc.theta - 0.5 * np.arctan(0.7)) < 1e-12
    # trace preservation
    ms = apc_dimer()
    assert abs((exc.omega_alpha + exc.omega_beta) - (ms.omega_a + ms.omega_b)) < 1e-8
    # splitting equals 2 sqrt((delta/2)^2 + J^2)
    R = np.hypot(0.1 * EV_TO_RADPS, 0.07 * EV_TO_RADPS)
    assert abs(abs(exc.omega_alpha - exc.omega_beta) - 2 * R) < 1e-8


def test_degenerate_homodimer_rejected():
    with pytest.raises(ValueError):
        MatterSystem(kind="cd", gamma=0.1, omega_a=5.0, omega_b=5.0, J=0.0)


def test_cd_char_fn_t0_limit():
    exc = excitonic(apc_dimer())
    f0 = char_fn(apc_dimer(), 0.0)
    assert abs(f0 - (exc.lambda_alpha ** 2 + exc.lambda_beta ** 2)) < 1e-12


def test_cd_closed_form_equals_expm2_sandwich():
    from biphospec.matter import _cd_generator
    ms = apc_dimer(gamma=0.15, gamma_perp=0.05)
    K, v, _ = _cd_generator(ms)
    for t in (0.0, 0.3, 2.0, 9.0, 25.0):
        direct = v @ expm2(K * t) @ v
        closed = char_fn(ms, t)
        assert abs(direct - closed) <= 1e-10 * max(1.0, abs(direct))


def test_cd_reduces_to_tls():
    # mu_b = 0, J = 0: single bright site, TLS response with Delta = Delta_alpha
    ms = coupled_dimer(gamma=0.2, omega_a=11.0, omega_b=5.0, J=0.0,
                       dip_a=1.0, dip_b=0.0, omega_bar_s=10.0)
    ref = tls(gamma=0.2, delta=1.0)
    t = np.linspace(0.0, 30.0, 7)
    assert np.max(np.abs(char_fn(ms, t) - char_fn(ref, t))) < 1e-10


@pytest.mark.parametrize("param", ["J", "gamma"])
def test_cd_derivative_matches_richardson_fd(param):
    ms = apc_dimer(gamma=0.15)
    t = np.array([0.4, 1.7, 6.0, 18.0])
    th0 = ms.value_of(param)
    h = 1e-5 * abs(th0) + 1e-8
    an = char_fn_deriv(ms, param, t)

    def fd(hh):
        return (char_fn(ms.shift(param, th0 + hh), t)
                - char_fn(ms.shift(param, th0 - hh), t)) / (2 * hh)

    rich = (4 * fd(h / 2) - fd(h)) / 3
    assert np.max(np.abs(an - rich) / np.abs(rich)) < 1e-6
    # plain central difference at the spec step agrees at FD-truncation level
    assert np.max(np.abs(an - fd(h)) / np.abs(fd(h))) < 1e-4


def test_cd_derivative_at_zero_j():
    ms = coupled_dimer(gamma=0.12, omega_a=9.0, omega_b=6.0, J=0.0,
                       dip_a=1.0, dip_b=1.0, omega_bar_s=9.0)
    t = np.array([0.5, 3.0, 12.0])
    an = char_fn_deriv(ms, "J", t)
    h = 1e-4

    def fd(hh):
        return (char_fn(ms.shift("J", hh), t) - char_fn(ms.shift("J", -hh), t)) / (2 * hh)

    rich = (4 * fd(h / 2) - fd(h)) / 3
    assert np.max(np.abs(an - rich) / np.abs(rich)) < 1e-6


def test_expm2_identity_and_diagonal():
    assert np.allclose(expm2(np.zeros((2, 2))), np.eye(2), atol=1e-15)
    x = 0.7
    out = expm2(np.diag([x, -x]).astype(complex))
    assert np.allclose(out, np.diag([np.exp(x), np.exp(-x)]), atol=1e-14)


def test_expm2_against_taylor_oracle(rng):
    for _ in range(25):
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        m /= max(np.linalg.norm(m), 1.0)
        ref = np.eye(2, dtype=complex)
        term = np.eye(2, dtype=complex)
        for k in range(1, 21):
            term = term @ m / k
            ref += term
        assert np.max(np.abs(expm2(m) - ref)) < 1e-10


def test_expm2_small_upsilon_branch():
    # upsilon ~ 0: traceless nilpotent-like matrix exercises the series
    m = np.array([[1e-6, 1e-5], [-1e-7, -1e-6]], dtype=complex)
    ref = np.eye(2) + m + m @ m / 2
    assert np.max(np.abs(expm2(m) - ref)) < 1e-12


def test_scaling_squaring_reference(rng):
    from scipy.linalg import expm as expm_ref
    for _ in range(10):
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        assert np.max(np.abs(expm2(m) - expm_ref(m))) < 1e-12 * max(1.0, np.linalg.norm(expm_ref(m)))
