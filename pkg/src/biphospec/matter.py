"""Matter systems (TLS, coupled dimer) and characteristic response functions.

Gamma is the population decay rate into the signal mode (ps^-1): the TLS
response is f(t) = exp(-[(Gamma+Gamma_perp)/2 + i*Delta] t).  All frequencies
are rad/ps; energies quoted in eV convert via EV_TO_RADPS.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .probe import EV_TO_RADPS

TLS_PARAMS = ("gamma", "omega0")
CD_PARAMS = ("J", "gamma")


@dataclass(frozen=True)
class MatterSystem:
    """TLS or coupled-dimer (CD) parameters.

    TLS: delta = omega0 - omega_bar_s is the detuning.  CD: site frequencies
    omega_a, omega_b and coupling J in rad/ps, transition dipoles dip_a,
    dip_b in Debye (only their ratio matters; dip_a is the reference),
    omega_bar_s the signal carrier frequency.
    """

    kind: str
    gamma: float
    gamma_perp: float = 0.0
    delta: float = 0.0
    omega_a: float = 0.0
    omega_b: float = 0.0
    J: float = 0.0
    dip_a: float = 1.0
    dip_b: float = 1.0
    omega_bar_s: float = 0.0

    def __post_init__(self):
        if self.kind not in ("tls", "cd"):
            raise ValueError(f"unknown matter kind {self.kind!r}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.gamma_perp < 0:
            raise ValueError("gamma_perp must be nonnegative")
        if self.kind == "cd" and self.omega_a == self.omega_b and self.J == 0.0:
            raise ValueError("degenerate homodimer with J = 0 has no excitonic splitting")

    def supports(self, param: str) -> bool:
        return param in (TLS_PARAMS if self.kind == "tls" else CD_PARAMS)

    def replace(self, **kw) -> "MatterSystem":
        from dataclasses import replace as _replace
        return _replace(self, **kw)

    def shift(self, param: str, value: float) -> "MatterSystem":
        """System with the estimation parameter set to the given value."""
        if not self.supports(param):
            raise ValueError(f"parameter {param!r} not applicable to {self.kind}")
        if param == "gamma":
            return self.replace(gamma=value)
        if param == "omega0":
            # omega0 enters only through delta = omega0 - omega_bar_s
            return self.replace(delta=value)
        if param == "J":
            return self.replace(J=value)
        raise ValueError(param)

    def value_of(self, param: str) -> float:
        if param == "gamma":
            return self.gamma
        if param == "omega0":
            return self.delta
        if param == "J":
            return self.J
        raise ValueError(param)


def tls(gamma: float, delta: float = 0.0, gamma_perp: float = 0.0) -> MatterSystem:
    return MatterSystem(kind="tls", gamma=gamma, gamma_perp=gamma_perp, delta=delta)


def coupled_dimer(gamma: float, omega_a: float, omega_b: float, J: float,
                  dip_a: float = 1.0, dip_b: float = 1.0,
                  omega_bar_s: Optional[float] = None, resonant_with: str = "beta",
                  gamma_perp: float = 0.0) -> MatterSystem:
    """CD system; if omega_bar_s is None the carrier locks to the chosen exciton."""
    ms = MatterSystem(kind="cd", gamma=gamma, gamma_perp=gamma_perp,
                      omega_a=omega_a, omega_b=omega_b, J=J,
                      dip_a=dip_a, dip_b=dip_b, omega_bar_s=0.0)
    if omega_bar_s is None:
        exc = excitonic(ms)
        om = {"alpha": exc.omega_alpha, "beta": exc.omega_beta}[resonant_with]
        ms = ms.replace(omega_bar_s=om)
    else:
        ms = ms.replace(omega_bar_s=omega_bar_s)
    return ms


def apc_dimer(gamma: float = 0.15, gamma_perp: float = 0.0,
              resonant_with: str = "beta") -> MatterSystem:
    """Allophycocyanin dimer: 1.6 / 1.8 eV sites, J = -0.07 eV, dipole ratio 1.5."""
    return coupled_dimer(
        gamma=gamma,
        omega_a=1.6 * EV_TO_RADPS,
        omega_b=1.8 * EV_TO_RADPS,
        J=-0.07 * EV_TO_RADPS,
        dip_a=1.0,
        dip_b=1.5,
        resonant_with=resonant_with,
        gamma_perp=gamma_perp,
    )


@dataclass(frozen=True)
class ExcitonicData:
    """Mixing angle, excitonic detunings and dipole projections of a CD."""

    theta: float
    omega_alpha: float
    omega_beta: float
    delta_alpha: float
    delta_beta: float
    lambda_alpha: float
    lambda_beta: float


def excitonic(ms: MatterSystem) -> ExcitonicData:
    """Excitonic basis of a coupled dimer.

    Theta = arctan(2J/delta)/2 on the principal branch (delta = omega_a -
    omega_b); the homodimer limit takes Theta = sign(J) pi/4.  Eigenvalues
    follow from projecting H onto the rotated states, which keeps the
    (Theta, omega_alpha) pairing consistent at all signs of delta and J.
    """
    if ms.kind != "cd":
        raise ValueError("excitonic data requires a CD system")
    delta = ms.omega_a - ms.omega_b
    if delta == 0.0:
        theta = np.sign(ms.J) * np.pi / 4
    else:
        theta = 0.5 * np.arctan(2 * ms.J / delta)
    c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
    omega_mean = 0.5 * (ms.omega_a + ms.omega_b)
    split = 0.5 * delta * c2 + ms.J * s2
    omega_alpha = omega_mean + split
    omega_beta = omega_mean - split
    mu0 = ms.dip_a
    la = np.cos(theta) * (ms.dip_a / mu0) + np.sin(theta) * (ms.dip_b / mu0)
    lb = -np.sin(theta) * (ms.dip_a / mu0) + np.cos(theta) * (ms.dip_b / mu0)
    return ExcitonicData(
        theta=float(theta),
        omega_alpha=float(omega_alpha),
        omega_beta=float(omega_beta),
        delta_alpha=float(omega_alpha - ms.omega_bar_s),
        delta_beta=float(omega_beta - ms.omega_bar_s),
        lambda_alpha=float(la),
        lambda_beta=float(lb),
    )


def expm2(m: np.ndarray) -> np.ndarray:
    """Closed-form matrix exponential of a 2x2 complex matrix.

    e^M = e^{(a+d)/2} [cosh(v) I + sinh(v)/v (M - (a+d)/2 I)] with
    v = sqrt((a-d)^2 + 4bc)/2; sinh(v)/v evaluated by series for |v| < 1e-4.
    """
    m = np.asarray(m, dtype=complex)
    a, b = m[0, 0], m[0, 1]
    c, d = m[1, 0], m[1, 1]
    half_tr = 0.5 * (a + d)
    v = 0.5 * np.sqrt((a - d) ** 2 + 4 * b * c)
    if abs(v) < 1e-4:
        v2 = v * v
        sinhc = 1.0 + v2 / 6.0 + v2 * v2 / 120.0
    else:
        sinhc = np.sinh(v) / v
    cosh = np.cosh(v)
    dev = m - half_tr * np.eye(2)
    return np.exp(half_tr) * (cosh * np.eye(2) + sinhc * dev)


def _cd_generator(ms: MatterSystem):
    """K with f(t) = v^T exp(K t) v, and the dipole vector v.

    K = -i diag(Delta_a, Delta_b) - (Gamma+Gamma_perp)/2 * v v^T on the
    singly-excited manifold; the dipole structure makes the decay rank one,
    which keeps the scattering map unitary at Gamma_perp = 0.
    """
    exc = excitonic(ms)
    v = np.array([exc.lambda_alpha, exc.lambda_beta])
    K = (-1j * np.diag([exc.delta_alpha, exc.delta_beta])
         - 0.5 * (ms.gamma + ms.gamma_perp) * np.outer(v, v)).astype(complex)
    return K, v, exc


def _sinhc(z: np.ndarray) -> np.ndarray:
    """sinh(z)/z with a series branch near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 0.0, z)
    out = np.where(small, 1.0 + z * z / 6.0 + z ** 4 / 120.0,
                   np.sinh(zs) / np.where(small, 1.0, zs))
    return out


def char_fn(ms: MatterSystem, t) -> np.ndarray:
    """Characteristic matter response f_M(t) for t >= 0 (vectorized).

    TLS: exp(-[(Gamma+Gamma_perp)/2 + i Delta] t).  CD: dipole-vector
    sandwich of the 2x2 matrix exponential, written in cosh/sinh closed form.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("characteristic function defined for t >= 0 only")
    if ms.kind == "tls":
        rate = 0.5 * (ms.gamma + ms.gamma_perp) + 1j * ms.delta
        return np.exp(-rate * t)
    K, v, _ = _cd_generator(ms)
    a, b = K[0, 0], K[0, 1]
    c, d = K[1, 0], K[1, 1]
    half_tr = 0.5 * (a + d)
    v0 = 0.5 * np.sqrt((a - d) ** 2 + 4 * b * c)
    z = v0 * t
    cosh = np.cosh(z)
    sinhc_t = _sinhc(z) * t  # sinh(v0 t)/v0
    la2, lb2 = v[0] ** 2, v[1] ** 2
    cross = 2 * v[0] * v[1]
    f = np.exp(half_tr * t) * (
        (la2 + lb2) * cosh
        + sinhc_t * (0.5 * (a - d) * (la2 - lb2) + cross * b)
    )
    return f


def _eig_expm_and_frechet(K: np.ndarray, dK: np.ndarray, t: np.ndarray):
    """exp(K t) and its directional derivative along dK, vectorized over t.

    Uses the eigendecomposition K = P diag(lam) P^-1 and the divided
    difference (e^{l1 t}-e^{l2 t})/(l1-l2), with a sinhc branch when the
    eigenvalues nearly coincide.
    """
    lam, P = np.linalg.eig(K)
    Pinv = np.linalg.inv(P)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e = np.exp(np.outer(t, lam))  # (nt, 2)
    expKt = np.einsum("ij,tj,jk->tik", P, e, Pinv)

    E = Pinv @ dK @ P
    dl = lam[0] - lam[1]
    mean = 0.5 * (lam[0] + lam[1])
    # divided difference Phi_12 = (e^{l1 t} - e^{l2 t})/dl = t e^{mean t} sinhc(dl t / 2)
    phi12 = t * np.exp(mean * t) * _sinhc(0.5 * dl * t)
    phi = np.empty((t.size, 2, 2), dtype=complex)
    phi[:, 0, 0] = t * e[:, 0]
    phi[:, 1, 1] = t * e[:, 1]
    phi[:, 0, 1] = phi12
    phi[:, 1, 0] = phi12
    dexp = np.einsum("ij,tjk,kl->til", P, E[None, :, :] * phi, Pinv)
    return expKt, dexp


def char_fn_deriv(ms: MatterSystem, param: str, t) -> np.ndarray:
    """Analytic parameter derivative of char_fn (vectorized over t)."""
    if not ms.supports(param):
        raise ValueError(f"parameter {param!r} not applicable to kind {ms.kind!r}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("characteristic function defined for t >= 0 only")
    if ms.kind == "tls":
        f = char_fn(ms, t)
        if param == "gamma":
            return -0.5 * t * f
        return -1j * t * f  # omega0 enters as -i Delta t

    K, v, exc = _cd_generator(ms)
    if param == "gamma":
        dK = -0.5 * np.outer(v, v).astype(complex)
        dv = np.zeros(2)
    else:  # J
        delta = ms.omega_a - ms.omega_b
        dtheta = delta / (delta ** 2 + 4 * ms.J ** 2) if (delta, ms.J) != (0.0, 0.0) else 0.0
        dv = dtheta * np.array([v[1], -v[0]])
        c2, s2 = np.cos(2 * exc.theta), np.sin(2 * exc.theta)
        dsplit = (-delta * s2 + 2 * ms.J * c2) * dtheta + s2
        dDelta = np.array([dsplit, -dsplit])
        dM = np.outer(dv, v) + np.outer(v, dv)
        dK = -1j * np.diag(dDelta) - 0.5 * (ms.gamma + ms.gamma_perp) * dM
    expKt, dexp = _eig_expm_and_frechet(K, dK, t)
    term_mid = np.einsum("i,tij,j->t", v, dexp, v)
    term_edge = 2.0 * np.einsum("i,tij,j->t", dv, expKt, v)
    out = term_mid + term_edge
    return out.reshape(np.shape(t)) if np.ndim(t) else out[0]
