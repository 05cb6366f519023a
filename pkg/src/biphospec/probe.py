"""Probe construction: time grids, pulse envelopes, PDC and TFM biphoton states.

Internal units are ps and rad/ps throughout.  Pump bandwidths quoted in
wavenumbers (cm^-1) are converted with :func:`wavenumber_to_radps`; the
default convention multiplies by c only ("ordinary", sigma = c * sigma_tilde),
which reproduces the published entanglement ordering on the pump grid.  The
"angular" convention (extra 2*pi) is available for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

C_CM_PER_PS = 0.0299792458  # speed of light, cm/ps
EV_TO_RADPS = 1519.267      # 1 eV in rad/ps (hbar = 6.582119569e-4 eV ps)
SINC_GAUSS_GAMMA = 0.04822  # Gaussian approximation of the sinc phase matching

#: T_S and T_I as multiples of the entanglement time T_qent (type-II collinear).
T_S_FACTOR = 0.12
T_I_FACTOR = 1.12

DEFAULT_ALPHA_OVER_HBAR = 0.01


class GridTooShortError(ValueError):
    """Raised when an envelope loses more than the allowed norm to truncation."""


def wavenumber_to_radps(sigma_cm: float, convention: str = "ordinary") -> float:
    """Convert a pump bandwidth in cm^-1 to rad/ps.

    convention "ordinary": sigma = c * sigma_tilde (default, matches the
    reference heatmaps); "angular": sigma = 2*pi*c * sigma_tilde.
    """
    if convention == "ordinary":
        return C_CM_PER_PS * sigma_cm
    if convention == "angular":
        return 2.0 * np.pi * C_CM_PER_PS * sigma_cm
    raise ValueError(f"unknown wavenumber convention {convention!r}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [t_min, t_max] with n samples."""

    t_min: float
    t_max: float
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("TimeGrid needs at least 2 samples")
        if not self.t_max > self.t_min:
            raise ValueError("TimeGrid needs t_max > t_min")

    @property
    def dt(self) -> float:
        return (self.t_max - self.t_min) / (self.n - 1)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n, self.dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_min, self.t_max, (self.n - 1) * factor + 1)


def inner(grid: TimeGrid, a: np.ndarray, b: np.ndarray) -> complex:
    """Trapezoid inner product <a|b> = int conj(a) b dt."""
    return complex(np.sum(grid.weights * np.conj(a) * b))


@dataclass
class Envelope:
    """Sampled complex pulse amplitude on a uniform time grid (units ps^-1/2)."""

    grid: TimeGrid
    amp: np.ndarray
    kind: str = "custom"
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def norm_sq(self) -> float:
        return float(np.sum(self.grid.weights * np.abs(self.amp) ** 2))

    def overlap(self, other: "Envelope") -> complex:
        if other.grid != self.grid:
            raise ValueError("envelope grids do not match")
        return inner(self.grid, self.amp, other.amp)

    def columns(self) -> np.ndarray:
        """(t, Re amp, Im amp) records for debugging dumps."""
        return np.column_stack([self.grid.t, self.amp.real, self.amp.imag])

    def dump(self, path: str):
        np.savetxt(path, self.columns(), header="t re_amp im_amp")


def hermite_gauss(n: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite-Gauss function h_n(x) by stable recurrence."""
    x = np.asarray(x, dtype=float)
    h_prev = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n == 0:
        return h_prev
    h_cur = np.sqrt(2.0) * x * h_prev
    for k in range(1, n):
        h_next = np.sqrt(2.0 / (k + 1)) * x * h_cur - np.sqrt(k / (k + 1.0)) * h_prev
        h_prev, h_cur = h_cur, h_next
    return h_cur


def hermite_gauss_family(n_max: int, x: np.ndarray) -> np.ndarray:
    """Rows h_0(x) .. h_{n_max-1}(x)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max, x.size))
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for k in range(1, n_max - 1):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * x * out[k] - np.sqrt(k / (k + 1.0)) * out[k - 1]
    return out


def make_envelope(kind: str, params: dict, grid: TimeGrid) -> Envelope:
    """Build a normalized envelope of the given kind on the grid.

    Kinds: "exponential" (tau), "gaussian" (tau, t_ar), "square" (tau),
    "hermite_gauss" (n, k, optional t_ar), "custom" (fn or samples).
    The amplitude is renormalized so the trapezoid norm is exactly 1; a
    truncated-norm deficit above 1e-6 raises GridTooShortError.
    """
    t = grid.t
    fn: Optional[Callable] = None
    if kind == "exponential":
        tau = params["tau"]
        if tau <= 0:
            raise ValueError("tau must be positive")
        fn = lambda s, tau=tau: np.where(s >= 0, np.exp(-np.clip(s, 0, None) / (2 * tau)) / np.sqrt(tau), 0.0)
        amp = fn(t).astype(complex)
    elif kind == "gaussian":
        tau = params["tau"]
        t_ar = params.get("t_ar", 0.0)
        if tau <= 0:
            raise ValueError("tau must be positive")
        fn = lambda s, tau=tau, t_ar=t_ar: np.pi ** -0.25 * tau ** -0.5 * np.exp(-((s - t_ar) ** 2) / (2 * tau ** 2))
        amp = fn(t).astype(complex)
    elif kind == "square":
        tau = params["tau"]
        if tau <= 0:
            raise ValueError("tau must be positive")
        if grid.t_min > 0.0 or grid.t_max < tau:
            raise GridTooShortError("square envelope support [0, tau] not contained in the grid")
        fn = lambda s, tau=tau: np.where((s >= 0) & (s <= tau), tau ** -0.5, 0.0)
        amp = fn(t).astype(complex)
    elif kind == "hermite_gauss":
        n = int(params.get("n", 0))
        k = params["k"]
        t_ar = params.get("t_ar", 0.0)
        if k <= 0:
            raise ValueError("scale k must be positive")
        fn = lambda s, n=n, k=k, t_ar=t_ar: hermite_gauss(n, (s - t_ar) / k) / np.sqrt(k)
        amp = fn(t).astype(complex)
    elif kind == "custom":
        if "fn" in params:
            fn = params["fn"]
            amp = np.asarray(fn(t), dtype=complex)
        else:
            amp = np.asarray(params["samples"], dtype=complex)
            if amp.shape != t.shape:
                raise ValueError("custom samples do not match the grid")
    else:
        raise ValueError(f"unknown envelope kind {kind!r}")

    nrm = float(np.sum(grid.weights * np.abs(amp) ** 2))
    if kind != "square":
        # Richardson pair (dt, 2dt) separates truncation loss from the O(dt^2)
        # trapezoid error; only genuine truncation should reject the grid.
        # (The square pulse carries interior jumps and is support-checked above.)
        sub = np.abs(amp[::2]) ** 2
        w2 = np.full(sub.size, 2 * grid.dt)
        w2[0] *= 0.5
        w2[-1] *= 0.5
        nrm2 = float(np.sum(w2 * sub))
        deficit = abs(1.0 - (4.0 * nrm - nrm2) / 3.0)
        if deficit > 1e-6:
            raise GridTooShortError(
                f"{kind} envelope norm deficit {deficit:.3e} exceeds 1e-6; enlarge or refine the grid"
            )
    amp = amp / np.sqrt(nrm)
    return Envelope(grid=grid, amp=amp, kind=kind, fn=fn)


def fourier_to_time(n: int, k: float, grid: TimeGrid) -> np.ndarray:
    """Time-domain image of the frequency mode sqrt(k) h_n(k w).

    Hermite-Gauss functions are eigenfunctions of the Fourier transform:
    (1/sqrt(2pi)) int dw e^{-iwt} sqrt(k) h_n(k w) = (-i)^n h_n(t/k)/sqrt(k).
    """
    return (-1j) ** n * hermite_gauss(n, grid.t / k) / np.sqrt(k)


# ---------------------------------------------------------------------------
# PDC Gaussian joint spectral amplitude and its Schmidt decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianJSA:
    """Quadratic-form coefficients of the Gaussian JSA (units (rad/ps)^-2).

    The amplitude is proportional to exp(-a wS^2 - 2 b wS wI - c wI^2) in
    re-centred frequencies, with a,b,c > 0 for the frequency-anticorrelated
    states considered here.
    """

    a: float
    b: float
    c: float
    alpha_over_hbar: float
    sigma_p: float
    T_S: float
    T_I: float
    T_qent: float

    def __post_init__(self):
        if self.a <= 0 or self.c <= 0:
            raise ValueError("JSA quadratic form must have a > 0 and c > 0")
        if self.a * self.c - self.b ** 2 <= 0:
            raise ValueError("JSA quadratic form must be elliptic (ac - b^2 > 0)")

    def value(self, w_s: np.ndarray, w_i: np.ndarray) -> np.ndarray:
        """Gaussian JSA amplitude at re-centred frequencies (rad/ps)."""
        pref = -1j * self.alpha_over_hbar / np.sqrt(2 * np.pi * self.sigma_p ** 2)
        return pref * np.exp(-self.a * w_s ** 2 - 2 * self.b * w_s * w_i - self.c * w_i ** 2)

    def value_sinc(self, w_s: np.ndarray, w_i: np.ndarray) -> np.ndarray:
        """JSA with the exact sinc phase matching (for approximation studies)."""
        pref = -1j * self.alpha_over_hbar / np.sqrt(2 * np.pi * self.sigma_p ** 2)
        pump = np.exp(-((w_s + w_i) ** 2) / (2 * self.sigma_p ** 2))
        return pref * np.sinc((self.T_S * w_s + self.T_I * w_i) / (2 * np.pi)) * pump


def pdc_gaussian_jsa(sigma_p: float, T_qent: float,
                     alpha_over_hbar: float = DEFAULT_ALPHA_OVER_HBAR) -> GaussianJSA:
    """Gaussian-approximated JSA for a type-II collinear PDC source.

    sigma_p is the classical pump bandwidth in rad/ps, T_qent the
    entanglement time in ps.  T_S = 0.12 T_qent and T_I = 1.12 T_qent.
    """
    if sigma_p <= 0 or T_qent <= 0:
        raise ValueError("sigma_p and T_qent must be positive")
    T_S = T_S_FACTOR * T_qent
    T_I = T_I_FACTOR * T_qent
    g = SINC_GAUSS_GAMMA
    pump = 1.0 / (2.0 * sigma_p ** 2)
    return GaussianJSA(
        a=pump + g * T_S ** 2,
        b=pump + g * T_S * T_I,
        c=pump + g * T_I ** 2,
        alpha_over_hbar=alpha_over_hbar,
        sigma_p=sigma_p,
        T_S=T_S,
        T_I=T_I,
        T_qent=T_qent,
    )


@dataclass(frozen=True)
class SchmidtFactors:
    """Analytic Schmidt data of a Gaussian JSA."""

    mu: float
    kappa_s: float
    kappa_i: float
    r0: complex

    def weight(self, n) -> np.ndarray:
        return self.r0 * self.mu ** np.asarray(n)

    def n_modes_for(self, tol: float = 1e-10, cap: Optional[int] = 64) -> int:
        """Smallest N with |mu|^(2N) < tol, optionally capped."""
        if self.mu == 0.0:
            return 1
        n = int(np.ceil(np.log(tol) / (2 * np.log(abs(self.mu))))) + 1
        n = max(n, 1)
        if cap is not None:
            n = min(n, cap)
        return n


def schmidt_factors(jsa: GaussianJSA) -> SchmidtFactors:
    """Schmidt parameter mu, axis projections kappa and leading weight r0.

    mu = (-sqrt(ac) + sqrt(ac - b^2)) / b (negative for b > 0; the signal and
    idler photons are anticorrelated in frequency, correlated in time).
    """
    a, b, c = jsa.a, jsa.b, jsa.c
    s = np.sqrt(a * c)
    q = np.sqrt(a * c - b * b)
    mu = 0.0 if b == 0 else (-s + q) / b
    ratio = (1 - mu * mu) / (1 + mu * mu)
    kappa_s = np.sqrt(2 * a * ratio)
    kappa_i = np.sqrt(2 * c * ratio)
    r0 = -1j * jsa.alpha_over_hbar * np.sqrt((1 + mu * mu) / (4 * s * jsa.sigma_p ** 2))
    return SchmidtFactors(mu=float(mu), kappa_s=float(kappa_s), kappa_i=float(kappa_i), r0=complex(r0))


@dataclass
class SchmidtState:
    """Truncated biphoton state in Schmidt form.

    Pairs signal_modes[n] with idler_modes[n] under weight r[n].  When
    has_vacuum is set the state is (|0> + sum_n r_n |sn>|in>)/sqrt(norm_const)
    with norm_const = 1 + sum |r_n|^2; otherwise the weights are normalized to
    sum |r_n|^2 = 1 and norm_const = 1.
    """

    r: np.ndarray
    signal_modes: list
    idler_modes: list
    norm_const: float = 1.0
    has_vacuum: bool = False
    factors: Optional[SchmidtFactors] = None

    @property
    def n_modes(self) -> int:
        return len(self.r)

    @property
    def grid(self) -> TimeGrid:
        return self.signal_modes[0].grid

    def signal_matrix(self) -> np.ndarray:
        return np.stack([m.amp for m in self.signal_modes])

    def idler_matrix(self) -> np.ndarray:
        return np.stack([m.amp for m in self.idler_modes])

    def mode_gram(self, which: str = "signal") -> np.ndarray:
        mat = self.signal_matrix() if which == "signal" else self.idler_matrix()
        w = self.grid.weights
        return (np.conj(mat) * w) @ mat.T

    def postselect(self) -> "SchmidtState":
        """Drop the vacuum component and renormalize to a proper biphoton state."""
        lam = np.sum(np.abs(self.r) ** 2)
        return SchmidtState(
            r=self.r / np.sqrt(lam),
            signal_modes=self.signal_modes,
            idler_modes=self.idler_modes,
            norm_const=1.0,
            has_vacuum=False,
            factors=self.factors,
        )


def pdc_schmidt(jsa: GaussianJSA, grid: TimeGrid, n_modes: Optional[int] = None,
                trunc_tol: float = 1e-10, cap: Optional[int] = 64):
    """Schmidt decomposition of a Gaussian-JSA PDC state on a time grid.

    Returns (SchmidtState, SchmidtFactors).  Signal (idler) modes are the
    time-domain images (-i)^n h_n(t/kappa)/sqrt(kappa) of the frequency-domain
    Hermite-Gauss Schmidt modes; weights are r0 mu^n with signed mu.  The
    vacuum component is kept (norm_const = 1 + sum |r_n|^2).
    """
    fac = schmidt_factors(jsa)
    n = n_modes if n_modes is not None else fac.n_modes_for(trunc_tol, cap)
    ns = np.arange(n)
    r = fac.weight(ns).astype(complex)

    sig_base = hermite_gauss_family(n, grid.t / fac.kappa_s) / np.sqrt(fac.kappa_s)
    idl_base = hermite_gauss_family(n, grid.t / fac.kappa_i) / np.sqrt(fac.kappa_i)
    phases = (-1j) ** ns
    signal = [Envelope(grid, phases[k] * sig_base[k].astype(complex), kind=f"pdc_schmidt_s{k}")
              for k in range(n)]
    idler = [Envelope(grid, phases[k] * idl_base[k].astype(complex), kind=f"pdc_schmidt_i{k}")
             for k in range(n)]

    state = SchmidtState(
        r=r,
        signal_modes=signal,
        idler_modes=idler,
        norm_const=float(1.0 + np.sum(np.abs(r) ** 2)),
        has_vacuum=True,
        factors=fac,
    )
    return state, fac


def reconstruct_jsa(fac: SchmidtFactors, n_modes: int,
                    w_s: np.ndarray, w_i: np.ndarray) -> np.ndarray:
    """Truncated Schmidt sum of the JSA on a frequency grid (for error studies).

    Sums r_n [sqrt(kS) h_n(kS wS)] [sqrt(kI) h_n(kI wI)] over the leading
    n_modes; converges to the Gaussian JSA in L2 as |mu|^(2 n_modes) -> 0.
    """
    hs = hermite_gauss_family(n_modes, fac.kappa_s * np.asarray(w_s)) * np.sqrt(fac.kappa_s)
    hi = hermite_gauss_family(n_modes, fac.kappa_i * np.asarray(w_i)) * np.sqrt(fac.kappa_i)
    r = fac.weight(np.arange(n_modes))
    return np.einsum("n,ni,nj->ij", r, hs, hi)


def entanglement_entropy(state: SchmidtState) -> float:
    """Entropy -sum p_n log p_n of the Schmidt weights renormalized to sum 1 (nats)."""
    p = np.abs(np.asarray(state.r if isinstance(state, SchmidtState) else state)) ** 2
    tot = p.sum()
    if tot <= 0:
        raise ValueError("entanglement entropy of an all-zero weight vector")
    p = p[p > 0] / tot
    return float(-np.sum(p * np.log(p)))


def tfm_state(theta_t: float, grid: TimeGrid, k1: float = 1.3, k2: float = 1.3,
              alpha_over_hbar: float = DEFAULT_ALPHA_OVER_HBAR) -> SchmidtState:
    """Two-term time-frequency pulse-mode state.

    cos(t)|h0_S>|h1_I> + sin(t)|h1_S>|h0_I| (plus vacuum), 0 <= t <= pi;
    note the anti-diagonal pairing: signal mode n pairs with idler mode 1-n.
    """
    if not (0.0 <= theta_t <= np.pi):
        raise ValueError("TFM angle must lie in [0, pi]")
    h0_s = make_envelope("hermite_gauss", {"n": 0, "k": k1}, grid)
    h1_s = make_envelope("hermite_gauss", {"n": 1, "k": k1}, grid)
    h0_i = make_envelope("hermite_gauss", {"n": 0, "k": k2}, grid)
    h1_i = make_envelope("hermite_gauss", {"n": 1, "k": k2}, grid)
    r = alpha_over_hbar * np.array([np.cos(theta_t), np.sin(theta_t)], dtype=complex)
    keep = np.abs(r) > 1e-15
    modes_s = [m for m, k in zip([h0_s, h1_s], keep) if k]
    modes_i = [m for m, k in zip([h1_i, h0_i], keep) if k]
    r = r[keep]
    return SchmidtState(
        r=r,
        signal_modes=modes_s,
        idler_modes=modes_i,
        norm_const=float(1.0 + np.sum(np.abs(r) ** 2)),
        has_vacuum=True,
    )


def default_grid(gamma: float, kappa_s: float = 0.0, kappa_i: float = 0.0,
                 n: int = 4096, span_factor: float = 20.0) -> TimeGrid:
    """Default symmetric grid [-span_factor*tau_char, +span_factor*tau_char].

    tau_char = max(1/gamma, kappa_s, kappa_i); n defaults to 2^12 and is
    meant to be doubled until target scalars move by < 0.1%.
    """
    tau_char = max(1.0 / gamma, kappa_s, kappa_i)
    return TimeGrid(-span_factor * tau_char, span_factor * tau_char, n)
