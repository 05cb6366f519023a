"""Two-sided generalized-density-matrix (GDM) master-equation engine.

Evolves blocks rho^{m,n}(t) = Tr_field U(t;theta1) |psi0><psi0| x |m><n| x
|0_E><0_E| U^dag(t;theta2) for Fock, coherent and photon-added-coherent
inputs, and extracts the QFI from the mixed second variation of
log |Tr rho(T)| on a (theta1, theta2) stencil.  For Gamma_perp = 0 the
result is the exact detected-field QFI; for Gamma_perp > 0 the matter-only
hierarchy (environment as a Lindblad dissipator) upper-bounds it.

The hierarchy is linear, so the right-hand side is assembled once as
dY/dt = [B0 + xi(t) Bx + conj(xi(t)) Bxc + alpha(t) Ba + conj(alpha(t)) Bac] Y
with Y the stacked vec'd blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .matter import MatterSystem, excitonic
from .probe import Envelope


def _matter_ops(ms: MatterSystem, param: str, value: float):
    """(H, La, Lb) in frequency units for the system with param set to value."""
    m = ms.shift(param, value)
    if m.kind == "tls":
        H = np.diag([0.0, m.delta]).astype(complex)
        L = np.zeros((2, 2), dtype=complex)
        L[0, 1] = 1.0
    else:
        exc = excitonic(m)
        H = np.diag([0.0, exc.delta_alpha, exc.delta_beta]).astype(complex)
        L = np.zeros((3, 3), dtype=complex)
        L[0, 1] = exc.lambda_alpha
        L[0, 2] = exc.lambda_beta
    return H, np.sqrt(m.gamma) * L, np.sqrt(m.gamma_perp) * L


def _envelope_fn(env: Envelope) -> Callable[[float], complex]:
    if env.fn is not None:
        return lambda t: complex(np.asarray(env.fn(np.asarray([t])))[0])
    t_grid = env.grid.t
    re = env.amp.real
    im = env.amp.imag
    return lambda t: complex(np.interp(t, t_grid, re) + 1j * np.interp(t, t_grid, im))


# Row-major vec (numpy ravel): vec(A rho) = (A x I) vec(rho),
# vec(rho B) = (I x B^T) vec(rho).

def _left(A: np.ndarray) -> np.ndarray:
    d = A.shape[0]
    return np.kron(A, np.eye(d))


def _right(B: np.ndarray) -> np.ndarray:
    d = B.shape[0]
    return np.kron(np.eye(d), B.T)


@dataclass
class GDMState:
    """Blocks rho^{m,n} (each d x d) at parameter pair (theta1, theta2)."""

    blocks: np.ndarray  # (N+1, N+1, d, d)
    theta1: float
    theta2: float
    t: float

    @property
    def top_trace(self) -> complex:
        return complex(np.trace(self.blocks[-1, -1]))


class _TwoSidedModel:
    """Constant superoperators of the two-sided hierarchy.

    Block layout: index (m, n) -> m*(N+1)+n, each block vec'd column-major in
    numpy's reshape order (row-major on (d, d), which matches _left/_right).
    """

    def __init__(self, ms: MatterSystem, param: str, theta1: float, theta2: float,
                 n_fock: int, xi: Optional[Callable], alpha: Optional[Callable]):
        H1, La1, Lb1 = _matter_ops(ms, param, theta1)
        H2, La2, Lb2 = _matter_ops(ms, param, theta2)
        d = H1.shape[0]
        self.d = d
        self.N = n_fock
        self.xi = xi
        self.alpha = alpha
        nb = n_fock + 1
        dim = nb * nb * d * d

        K1 = -1j * H1 - 0.5 * (La1.conj().T @ La1 + Lb1.conj().T @ Lb1)
        K2 = +1j * H2 - 0.5 * (La2.conj().T @ La2 + Lb2.conj().T @ Lb2)
        block_diag = (_left(K1) + _right(K2)
                      + _right(La2.conj().T) @ _left(La1)
                      + _right(Lb2.conj().T) @ _left(Lb1))
        drive_a = _right(La2.conj().T) - _left(La1.conj().T)   # multiplies alpha or xi
        drive_ac = _left(La1) - _right(La2)                    # multiplies conj(alpha/xi)

        B0 = np.zeros((dim, dim), dtype=complex)
        Bx = np.zeros_like(B0)
        Bxc = np.zeros_like(B0)
        Ba = np.zeros_like(B0)
        Bac = np.zeros_like(B0)
        dd = d * d

        def sl(m, n):
            k = (m * nb + n) * dd
            return slice(k, k + dd)

        for m in range(nb):
            for n in range(nb):
                B0[sl(m, n), sl(m, n)] = block_diag
                if alpha is not None:
                    Ba[sl(m, n), sl(m, n)] = drive_a
                    Bac[sl(m, n), sl(m, n)] = drive_ac
                if m > 0:
                    Bx[sl(m, n), sl(m - 1, n)] = np.sqrt(m) * drive_a
                if n > 0:
                    Bxc[sl(m, n), sl(m, n - 1)] = np.sqrt(n) * drive_ac
        self.B0, self.Bx, self.Bxc, self.Ba, self.Bac = B0, Bx, Bxc, Ba, Bac
        self.dim = dim

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        out = self.B0 @ y
        if self.xi is not None:
            x = self.xi(t)
            if x != 0.0:
                out += x * (self.Bx @ y) + np.conj(x) * (self.Bxc @ y)
        if self.alpha is not None:
            a = self.alpha(t)
            if a != 0.0:
                out += a * (self.Ba @ y) + np.conj(a) * (self.Bac @ y)
        return out

    def initial(self, psi0: np.ndarray) -> np.ndarray:
        nb = self.N + 1
        y0 = np.zeros((nb, nb, self.d, self.d), dtype=complex)
        rho0 = np.outer(psi0, psi0.conj())
        for m in range(nb):
            y0[m, m] = rho0
        return y0.ravel()


def _integrate_model(model: _TwoSidedModel, psi0: np.ndarray, t_span,
                     rtol: float, atol: float,
                     theta1: float = 0.0, theta2: float = 0.0) -> GDMState:
    sol = solve_ivp(model.rhs, t_span, model.initial(psi0), method="RK45",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"GDM integration failed: {sol.message}")
    nb = model.N + 1
    blocks = sol.y[:, -1].reshape(nb, nb, model.d, model.d)
    return GDMState(blocks=blocks, theta1=theta1, theta2=theta2,
                    t=float(t_span[1]))


def trajectory(model: _TwoSidedModel, T: float, t0: float = 0.0,
               n_samples: int = 200, rtol: float = 1e-8, atol: float = 1e-10):
    """(t, Tr rho^{N,N}(t)) along one stencil point (debug interface)."""
    d = model.d
    psi0 = np.zeros(d, dtype=complex)
    psi0[0] = 1.0
    ts = np.linspace(t0, T, n_samples)
    sol = solve_ivp(model.rhs, (t0, T), model.initial(psi0), method="RK45",
                    rtol=rtol, atol=atol, t_eval=ts)
    if not sol.success:
        raise RuntimeError(f"GDM integration failed: {sol.message}")
    nb = model.N + 1
    blocks = sol.y.reshape(nb, nb, d, d, -1)
    traces = np.trace(blocks[-1, -1], axis1=0, axis2=1)
    return ts, traces


def fock_rhs(ms: MatterSystem, param: str, theta1: float, theta2: float,
             xi: Envelope, n_fock: int = 1) -> _TwoSidedModel:
    """Two-sided Fock hierarchy ((n_fock+1)^2 blocks, terminating at (0,0))."""
    return _TwoSidedModel(ms, param, theta1, theta2, n_fock, _envelope_fn(xi), None)


def coherent_rhs(ms: MatterSystem, param: str, theta1: float, theta2: float,
                 alpha: Envelope, mean_n: float = 1.0) -> _TwoSidedModel:
    """Two-sided coherent-state equation (single block); alpha scaled to mean_n."""
    base = _envelope_fn(alpha)
    scale = np.sqrt(mean_n)
    return _TwoSidedModel(ms, param, theta1, theta2, 0, None,
                          lambda t: scale * base(t))


def pacs_rhs(ms: MatterSystem, param: str, theta1: float, theta2: float,
             alpha: Envelope, xi: Envelope, n_added: int = 1,
             alpha_amp: float = 1.0) -> _TwoSidedModel:
    """Photon-added-coherent hierarchy: Fock ladder plus coherent terminator."""
    if alpha.grid != xi.grid:
        raise ValueError("alpha and xi must share a grid")
    base = _envelope_fn(alpha)
    return _TwoSidedModel(ms, param, theta1, theta2, n_added, _envelope_fn(xi),
                          lambda t: alpha_amp * base(t))


@dataclass
class LikelihoodSurface:
    """3x3 stencil of Tr rho_{theta1,theta2}(T) at theta +- h."""

    values: np.ndarray  # (3, 3); index (i, j) -> (theta + (i-1)h, theta + (j-1)h)
    h: float
    theta: float

    def check(self, tol: float = 1e-9):
        v = self.values
        if np.max(np.abs(np.imag(np.diag(v)))) > tol:
            raise ValueError("diagonal stencil entries are not real")
        if np.max(np.abs(v - v.conj().T)) > np.sqrt(tol):
            raise ValueError("stencil is not Hermitian-symmetric")
        return self


def likelihood_surface(ms: MatterSystem, param: str, kind: str, T: float,
                       h: Optional[float] = None,
                       xi: Optional[Envelope] = None,
                       alpha: Optional[Envelope] = None,
                       n_fock: int = 1, mean_n: float = 1.0,
                       alpha_amp: float = 1.0,
                       rtol: float = 1e-8, atol: float = 1e-10) -> LikelihoodSurface:
    """Integrate the 3x3 overlap stencil for one input kind.

    kind in {"fock", "coherent", "pacs"}.  Default stencil step:
    h = 1e-3 |theta| + 1e-5.
    """
    theta0 = ms.value_of(param)
    if h is None:
        h = 1e-3 * abs(theta0) + 1e-5
    d = 2 if ms.kind == "tls" else 3
    psi0 = np.zeros(d, dtype=complex)
    psi0[0] = 1.0
    t0 = min(0.0, xi.grid.t_min if xi is not None else 0.0,
             alpha.grid.t_min if alpha is not None else 0.0)

    offs = np.array([-h, 0.0, h])
    vals = np.empty((3, 3), dtype=complex)
    for i, d1 in enumerate(offs):
        for j, d2 in enumerate(offs):
            if kind == "fock":
                model = fock_rhs(ms, param, theta0 + d1, theta0 + d2, xi, n_fock)
            elif kind == "coherent":
                model = coherent_rhs(ms, param, theta0 + d1, theta0 + d2, alpha, mean_n)
            elif kind == "pacs":
                model = pacs_rhs(ms, param, theta0 + d1, theta0 + d2, alpha, xi,
                                 n_fock, alpha_amp)
            else:
                raise ValueError(f"unknown GDM input kind {kind!r}")
            state = _integrate_model(model, psi0, (t0, T), rtol, atol,
                                     theta0 + d1, theta0 + d2)
            vals[i, j] = state.top_trace
    return LikelihoodSurface(values=vals, h=h, theta=theta0)


def gdm_qfi(surface: LikelihoodSurface) -> float:
    """QFI from the mixed second difference of log|Tr rho| on the stencil.

    Q = 4 d^2/(dtheta1 dtheta2) log F at theta1 = theta2 = theta, with
    F = |Tr rho| for globally pure evolution.
    """
    surface.check()
    L = np.log(np.abs(surface.values))
    mixed = (L[2, 2] - L[2, 0] - L[0, 2] + L[0, 0]) / (4.0 * surface.h ** 2)
    q = 4.0 * mixed
    if q < -1e-8:
        raise ValueError(f"negative GDM QFI {q:.3e}: stencil too coarse")
    return float(q)


def gdm_qfi_richardson(make_surface: Callable[[float], LikelihoodSurface],
                       h: float, agree_tol: float = 5e-3):
    """Richardson pair (h, h/2): returns (extrapolated QFI, diagnostics)."""
    q_h = gdm_qfi(make_surface(h))
    q_h2 = gdm_qfi(make_surface(h / 2))
    rel = abs(q_h - q_h2) / max(abs(q_h2), 1e-300)
    if rel > agree_tol:
        raise RuntimeError(
            f"Richardson pair disagrees by {rel:.2e} (> {agree_tol}); refine h or tolerances"
        )
    q = (4.0 * q_h2 - q_h) / 3.0
    return q, {"q_h": q_h, "q_h2": q_h2, "rel_change": rel}


def fock_qfi(ms: MatterSystem, param: str, xi: Envelope, n_fock: int = 1,
             T: Optional[float] = None, h: Optional[float] = None,
             rtol: float = 1e-8, atol: float = 1e-10):
    """Richardson-confirmed Fock-input QFI (default T = 80/Gamma)."""
    if T is None:
        T = 80.0 / ms.gamma
    theta0 = ms.value_of(param)
    if h is None:
        h = 1e-3 * abs(theta0) + 1e-5

    def make(hh):
        return likelihood_surface(ms, param, "fock", T, hh, xi=xi, n_fock=n_fock,
                                  rtol=rtol, atol=atol)

    return gdm_qfi_richardson(make, h)
