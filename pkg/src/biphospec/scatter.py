"""Asymptotic scattering of Schmidt modes off a matter system.

The outgoing signal mode for input xi is phi = xi - Gamma * eps with
eps(t) = int_{-inf}^t f_M(t - tau) xi(tau) dtau.  Everything downstream
(QFI, CFI, conditional idler state) only needs the pairwise Gram matrices
of {phi_n}, {d_theta phi_n} and {eps_n}, which are assembled here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve

from .matter import MatterSystem, char_fn, char_fn_deriv
from .probe import Envelope, SchmidtState, TimeGrid


def causal_conv(kernel: np.ndarray, fields: np.ndarray, dt: float,
                method: str = "fft") -> np.ndarray:
    """Trapezoid causal convolution (conv(kernel, field))[i] = int_0^{t_i}.

    kernel is sampled on k*dt for k = 0..n-1 starting at 0+; fields may be
    (n,) or (m, n).  The direct method is O(n^2) and kept for validation.
    """
    fields = np.atleast_2d(np.asarray(fields, dtype=complex))
    kernel = np.asarray(kernel, dtype=complex)
    n = fields.shape[1]
    if kernel.shape[0] != n:
        raise ValueError("kernel and field grids do not match")
    if method == "fft":
        full = fftconvolve(fields, kernel[None, :], mode="full", axes=1)[:, :n]
    elif method == "direct":
        full = np.stack([np.convolve(f, kernel)[:n] for f in fields])
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    # trapezoid end corrections: half weight at tau = t_0 and tau = t_i
    out = dt * (full - 0.5 * np.outer(fields[:, 0], kernel) - 0.5 * kernel[0] * fields)
    return out


def distort(xi: Envelope, ms: MatterSystem, method: str = "fft") -> Envelope:
    """Causal convolution of an envelope with the matter response (unnormalized)."""
    grid = xi.grid
    kernel = char_fn(ms, grid.t - grid.t_min)
    eps = causal_conv(kernel, xi.amp, grid.dt, method=method)[0]
    return Envelope(grid=grid, amp=eps, kind=f"distorted({xi.kind})")


def _gram(w: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix of trapezoid inner products <A_m|B_n>."""
    return (np.conj(A) * w) @ B.T


@dataclass
class ScatteredState:
    """Outgoing signal modes, their theta-derivatives and all Gram matrices.

    Matrices are over the photon Schmidt modes only; the vacuum component of
    the source state (if any) is tracked through norm_const/has_vacuum and
    virtually extended where needed by the fisher module.  The pure outgoing
    component has squared norm A = norm_const - N_raw.
    """

    ms: MatterSystem
    theta: str
    grid: TimeGrid
    r: np.ndarray                 # photon-sector Schmidt weights
    norm_const: float
    has_vacuum: bool
    eps_gram: np.ndarray          # <eps_m|eps_n>
    G: np.ndarray                 # <phi_m|phi_n>
    D: np.ndarray                 # <phi_m|d phi_n>
    E: np.ndarray                 # <d phi_m|d phi_n>
    F: np.ndarray                 # <eps_m|d_theta eps_n>
    N_raw: float                  # loss probability before source normalization
    N_raw_theta: float
    src: Optional[SchmidtState] = None
    phi: Optional[np.ndarray] = None
    dphi: Optional[np.ndarray] = None
    eps: Optional[np.ndarray] = None

    @property
    def n_modes(self) -> int:
        return len(self.r)

    def weighted_diag_sums(self):
        """(g, d, e) = sum_n |r_n|^2 (G_nn, D_nn, E_nn) plus vacuum in g."""
        cached = getattr(self, "_diag_sums", None)
        if cached is not None:
            return cached
        p = np.abs(self.r) ** 2
        g = float(np.real(np.sum(p * np.diag(self.G))))
        d = complex(np.sum(p * np.diag(self.D)))
        e = float(np.real(np.sum(p * np.diag(self.E))))
        if self.has_vacuum:
            g += 1.0
        self._diag_sums = (g, d, e)
        return self._diag_sums

    # The loss probability has two consistent routes: the environment-gram
    # route N_raw = Gamma Gamma_perp sum |r|^2 <eps|eps> and the unitarity
    # route norm_const - sum |r|^2 <phi|phi>.  The Gram route below keeps
    # every downstream Fisher formula exactly self-consistent on the grid;
    # agreement of the two routes is a discretization invariant.

    @property
    def A(self) -> float:
        """Squared norm of the unrenormalized pure outgoing component."""
        g, _, _ = self.weighted_diag_sums()
        return g

    @property
    def A_theta(self) -> float:
        _, d, _ = self.weighted_diag_sums()
        return 2.0 * float(np.real(d))

    @property
    def loss(self) -> float:
        """Loss weight entering the outgoing mixture (N, or n = N/N_PDC)."""
        return 1.0 - self.A / self.norm_const

    @property
    def loss_theta(self) -> float:
        return -self.A_theta / self.norm_const

    def dump_fields(self, path: str):
        """Columnar time series of phi_n and eps_n (debug interface)."""
        if self.phi is None or self.eps is None:
            raise ValueError("fields were not kept; rerun with keep_fields=True")
        cols = [self.grid.t]
        names = ["t"]
        for k in range(self.n_modes):
            cols += [self.phi[k].real, self.phi[k].imag,
                     self.eps[k].real, self.eps[k].imag]
            names += [f"re_phi{k}", f"im_phi{k}", f"re_eps{k}", f"im_eps{k}"]
        np.savetxt(path, np.column_stack(cols), header=" ".join(names))


def scatter_schmidt(src: SchmidtState, ms: MatterSystem, theta: str,
                    keep_fields: bool = True, method: str = "fft",
                    chunk: int = 16) -> ScatteredState:
    """Scatter every Schmidt mode and assemble the Gram matrices.

    theta in {"gamma", "omega0", "J"} selects the estimation parameter; the
    gamma derivative includes both the explicit -eps term and the implicit
    kernel derivative (phi = xi - Gamma eps[f] so d_Gamma phi =
    -eps[f] - Gamma eps[d_Gamma f]).
    """
    if src.n_modes == 0:
        raise ValueError("empty Schmidt mode set")
    if not ms.supports(theta):
        raise ValueError(f"parameter {theta!r} not applicable to kind {ms.kind!r}")
    grid = src.grid
    t_rel = grid.t - grid.t_min
    kernel = char_fn(ms, t_rel)
    dkernel = char_fn_deriv(ms, theta, t_rel)
    dt = grid.dt
    w = grid.weights
    gamma, gperp = ms.gamma, ms.gamma_perp

    xi = src.signal_matrix()
    K = xi.shape[0]
    eps = np.empty_like(xi)
    deps = np.empty_like(xi)
    for lo in range(0, K, chunk):
        hi = min(lo + chunk, K)
        eps[lo:hi] = causal_conv(kernel, xi[lo:hi], dt, method=method)
        deps[lo:hi] = causal_conv(dkernel, xi[lo:hi], dt, method=method)

    phi = xi - gamma * eps
    if theta == "gamma":
        dphi = -eps - gamma * deps
    else:
        dphi = -gamma * deps

    eps_gram = _gram(w, eps, eps)
    F = _gram(w, eps, deps)
    G = _gram(w, phi, phi)
    D = _gram(w, phi, dphi)
    E = _gram(w, dphi, dphi)

    p = np.abs(src.r) ** 2
    coup = gamma * gperp
    N_raw = float(coup * np.sum(p * np.real(np.diag(eps_gram))))
    N_raw_theta = float(coup * np.sum(p * 2.0 * np.real(np.diag(F))))
    if theta == "gamma":
        N_raw_theta += float(gperp * np.sum(p * np.real(np.diag(eps_gram))))

    return ScatteredState(
        ms=ms, theta=theta, grid=grid,
        r=np.asarray(src.r, dtype=complex),
        norm_const=float(src.norm_const),
        has_vacuum=src.has_vacuum,
        eps_gram=eps_gram, G=G, D=D, E=E, F=F,
        N_raw=N_raw, N_raw_theta=N_raw_theta,
        src=src,
        phi=phi if keep_fields else None,
        dphi=dphi if keep_fields else None,
        eps=eps if keep_fields else None,
    )


def idler_sigma(s: ScatteredState):
    """Conditional idler state when the excitation is lost, and its derivative.

    sigma = (Gamma Gamma_perp / N_raw) diag(r) eps_gram^T diag(r)^dagger in
    the idler Schmidt basis (the environment distortions share the signal
    kernel up to coupling constants).  Returns (sigma, dsigma).
    """
    if s.N_raw <= 0:
        raise ValueError("no loss channel (N = 0); skip the idler term")
    coup = s.ms.gamma * s.ms.gamma_perp
    dr = np.diag(s.r)
    drc = np.diag(np.conj(s.r))
    S_raw = coup * (dr @ s.eps_gram.T @ drc)
    sigma = S_raw / s.N_raw
    dS_raw = coup * (dr @ (s.F + s.F.conj().T).T @ drc)
    if s.theta == "gamma":
        dS_raw = dS_raw + S_raw / s.ms.gamma
    dsigma = dS_raw / s.N_raw - (s.N_raw_theta / s.N_raw) * sigma
    return sigma, dsigma
