"""Fisher-information quantities for the scattered biphoton state.

Conventions: the pure outgoing component is
|Phi> = A^{-1/2} sum_mu w_mu |phi_mu>|xi_mu^I>, where the mode index may
include the source vacuum (w_vac = 1, phi_vac = |0_S>) and A = sum_mu
|w_mu|^2 <phi_mu|phi_mu> is its squared norm (equal to norm_const - N in
the continuum).  All quantities below reduce to plain matrix algebra on the
Gram matrices carried by a ScatteredState.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .scatter import ScatteredState, idler_sigma

_TINY_P = 1e-14


# ---------------------------------------------------------------------------
# generic QFI building blocks
# ---------------------------------------------------------------------------

def qfi_pure(dd: float, sd: complex) -> float:
    """Pure-state QFI 4(<dpsi|dpsi> - |<psi|dpsi>|^2) from the two overlaps."""
    val = 4.0 * (np.real(dd) - abs(sd) ** 2)
    if val < -1e-12 * max(1.0, abs(dd)):
        raise ValueError("inconsistent overlaps: <dpsi|dpsi> < |<psi|dpsi>|^2")
    return float(max(val, 0.0))


def sld(rho: np.ndarray, drho: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Symmetric logarithmic derivative solving L rho + rho L = 2 drho.

    Solved in the eigenbasis of rho: L_ij = 2 drho_ij / (p_i + p_j) on the
    supported subspace (p_i + p_j > tol * max eigenvalue), zero elsewhere.
    """
    rho = np.asarray(rho, dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    if not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("rho must be Hermitian")
    if not np.allclose(drho, drho.conj().T, atol=1e-10):
        raise ValueError("drho must be Hermitian")
    p, U = np.linalg.eigh(rho)
    dr = U.conj().T @ drho @ U
    denom = p[:, None] + p[None, :]
    keep = denom > tol * max(p.max(), 0.0)
    Lmat = np.where(keep, 2.0 * dr / np.where(keep, denom, 1.0), 0.0)
    return U @ Lmat @ U.conj().T


def qfi_sld(rho: np.ndarray, drho: np.ndarray) -> float:
    """QFI via Tr(rho L^2) with the regularized SLD solve."""
    L = sld(rho, drho)
    return float(np.real(np.trace(rho @ L @ L)))


def qfi_mixed_spectral(rho: np.ndarray, drho: np.ndarray, tol: float = 1e-12) -> float:
    """Mixed-state QFI from the spectral decomposition of rho.

    Q = sum_n (dp_n)^2/p_n + 4 sum_n p_n <dpsi_n|dpsi_n>
        - sum_mn 8 p_m p_n/(p_m+p_n) |<dpsi_m|psi_n>|^2,
    assembled pairwise so degenerate eigenvalues stay regular.
    """
    rho = np.asarray(rho, dtype=complex)
    drho = np.asarray(drho, dtype=complex)
    p, U = np.linalg.eigh(rho)
    dr = U.conj().T @ drho @ U
    pmax = max(p.max(), 0.0)
    q = 0.0
    n = len(p)
    for i in range(n):
        if p[i] > tol * pmax:
            q += np.real(dr[i, i]) ** 2 / p[i]
    for i in range(n):
        for j in range(i + 1, n):
            denom = p[i] + p[j]
            if denom > tol * pmax:
                q += 4.0 * abs(dr[i, j]) ** 2 / denom
    return float(q)


def classical_fisher(p: np.ndarray, dp: np.ndarray, tiny: float = _TINY_P) -> float:
    """Two-or-more-outcome classical Fisher information sum (dp)^2 / p."""
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp, dtype=float)
    mask = p > tiny * max(p.max(), 1.0)
    return float(np.sum(dp[mask] ** 2 / p[mask]))


# ---------------------------------------------------------------------------
# vacuum-extended mode data
# ---------------------------------------------------------------------------

def _extended(s: ScatteredState):
    """Weights and Grams with the source vacuum prepended as mode 0."""
    if not s.has_vacuum:
        return s.r, s.G, s.D, s.E
    K = s.n_modes
    w = np.concatenate(([1.0 + 0j], s.r))
    G = np.zeros((K + 1, K + 1), dtype=complex)
    G[0, 0] = 1.0
    G[1:, 1:] = s.G
    D = np.zeros_like(G)
    D[1:, 1:] = s.D
    E = np.zeros_like(G)
    E[1:, 1:] = s.E
    return w, G, D, E


def state_overlaps(s: ScatteredState) -> Tuple[float, complex]:
    """(<dPhi|dPhi>, <Phi|dPhi>) of the normalized pure outgoing state."""
    g, d, e = s.weighted_diag_sums()
    A = s.A
    a = A ** -0.5
    da = -0.5 * s.A_theta * A ** -1.5
    dd = da * da * g + 2.0 * a * da * np.real(d) + a * a * e
    sd = a * da * g + a * a * d
    return float(dd), complex(sd)


def biphoton_qfi(s: ScatteredState) -> float:
    """QFI of the pure outgoing (bi)photon component.

    Q = (4/A) sum |w|^2 <dphi|dphi> - (4/A^2) |sum |w|^2 <phi|dphi>|^2; the
    normalization derivatives cancel exactly against the diagonal sums.
    """
    _, d, e = s.weighted_diag_sums()
    A = s.A
    return float(4.0 * e / A - 4.0 * abs(d) ** 2 / A ** 2)


# ---------------------------------------------------------------------------
# 1-LOCC idler-to-signal CFI
# ---------------------------------------------------------------------------

def locc_cfi(s: ScatteredState, V: Optional[np.ndarray] = None,
             return_parts: bool = False):
    """CFI of the measurement-optimal idler-to-signal 1-LOCC for unitary V.

    V acts on the photon-sector idler Schmidt basis (identity when None);
    the source vacuum, when present, is a fixed extra outcome.  Computed as
    the QFI of the flagged post-preparation state:
    C = 4 sum_x [ <dzeta_x|dzeta_x> - (Im<zeta_x|dzeta_x>)^2 / p_x ],
    which splits into subensemble QFIs plus the classical mixing CFI.
    """
    K = s.n_modes
    if V is None:
        V = np.eye(K, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if V.shape != (K, K):
        raise ValueError("V must act on the truncated idler space")
    if np.linalg.norm(V.conj().T @ V - np.eye(K)) > 1e-8:
        raise ValueError("V is not unitary within 1e-8")

    w, G, D, E = _extended(s)
    if s.has_vacuum:
        Vx = np.zeros((K + 1, K + 1), dtype=complex)
        Vx[0, 0] = 1.0
        Vx[1:, 1:] = V
    else:
        Vx = V

    A = s.A
    a = A ** -0.5
    da = -0.5 * s.A_theta * A ** -1.5

    C = np.diag(w) @ np.conj(Vx)         # column x: coefficients of zeta_x
    GC = C.conj().T @ G @ C
    DC = C.conj().T @ D @ C
    EC = C.conj().T @ E @ C
    gd = np.real(np.diag(GC))
    dd = np.diag(DC)
    ed = np.real(np.diag(EC))

    p = a * a * gd
    u = a * da * gd + a * a * dd                       # <zeta_x|d zeta_x>
    dzeta2 = da * da * gd + 2 * a * da * np.real(dd) + a * a * ed

    mask = p > _TINY_P * max(p.max(), 1.0)
    quantum = 4.0 * np.sum(dzeta2)
    penalty = 4.0 * np.sum(np.imag(u[mask]) ** 2 / p[mask])
    value = float(quantum - penalty)
    if return_parts:
        classical = classical_fisher(p, 2.0 * np.real(u))
        return value, classical
    return value


@dataclass
class XOperator:
    """Idler-space operator X_mn = w_m conj(w_n) <phi_n|d phi_m>."""

    x: np.ndarray
    trace_x: complex


def x_operator(s: ScatteredState, check_tol: float = 1e-8) -> XOperator:
    """Assemble X and verify its trace identity.

    Tr X = A <Phi|dPhi> + A_theta/2, with <Phi|dPhi> and A_theta computed
    from the independently accumulated loss derivative.
    """
    w, G, D, E = _extended(s)
    X = np.diag(w) @ D.T @ np.diag(np.conj(w))
    tr = complex(np.trace(X))
    _, sd = state_overlaps(s)
    expected = s.A * sd + 0.5 * s.A_theta
    scale = max(abs(tr), abs(expected), 1.0)
    if abs(tr - expected) > check_tol * scale:
        raise ValueError(
            f"Tr X identity violated: {tr:.6e} vs {expected:.6e}"
        )
    return XOperator(x=X, trace_x=tr)


# ---------------------------------------------------------------------------
# optimal preparation unitary (zero-diagonal construction)
# ---------------------------------------------------------------------------

def _equalize_pair(M2: np.ndarray) -> np.ndarray:
    """2x2 unitary U with both diagonal entries of U^dag M2 U equal to tr/2.

    Writes M2 = c I + M0 with M0 traceless and finds a unit vector v with
    v^dag M0 v = 0: the phase phi aligns the off-diagonal phasor with the
    diagonal entry d, the angle then follows from atan2.
    """
    d = 0.5 * (M2[0, 0] - M2[1, 1])
    b, c = M2[0, 1], M2[1, 0]
    if abs(d) < 1e-300:
        return np.eye(2, dtype=complex)
    u = b * np.conj(d)
    v = c * np.conj(d)
    P = np.real(u) - np.real(v)
    Q = np.imag(u) + np.imag(v)
    phi = 0.0 if (P == 0.0 and Q == 0.0) else np.arctan2(-Q, P)
    beta = 0.5 * (b * np.exp(1j * phi) + c * np.exp(-1j * phi))
    rho = np.real(beta * np.conj(d)) / abs(d)
    t = 0.5 * np.arctan2(-abs(d), rho)
    ct, st = np.cos(t), np.sin(t)
    return np.array([[ct, -st], [np.exp(1j * phi) * st, np.exp(1j * phi) * ct]])


def zero_diagonal_unitary(T: np.ndarray, tol: float = 1e-12,
                          max_sweeps: int = 500) -> np.ndarray:
    """Unitary V0 with diag(V0^dag T V0) = 0 for traceless T.

    Iterated 2x2 midpoint rotations: each step replaces a pair of diagonal
    entries by their mean (always achievable for 2x2), pairing the largest
    entry with its best compensator; the diagonal contracts geometrically to
    the common mean, which is zero.
    """
    T = np.asarray(T, dtype=complex)
    n = T.shape[0]
    scale = max(np.linalg.norm(T), 1e-300)
    if abs(np.trace(T)) > 1e-8 * scale:
        raise ValueError("zero-diagonal construction requires a traceless matrix")
    M = T.copy()
    V = np.eye(n, dtype=complex)
    for _ in range(max_sweeps):
        dvec = np.diag(M)
        if np.max(np.abs(dvec)) < tol * scale:
            break
        order = np.argsort(-np.abs(dvec))
        used = np.zeros(n, dtype=bool)
        for i in order:
            if used[i]:
                continue
            cand = [j for j in range(n) if j != i and not used[j]]
            if not cand:
                break
            j = min(cand, key=lambda k: abs(M[i, i] + M[k, k]))
            idx = np.array([i, j])
            U2 = _equalize_pair(M[np.ix_(idx, idx)])
            Ufull = np.eye(n, dtype=complex)
            Ufull[np.ix_(idx, idx)] = U2
            M = Ufull.conj().T @ M @ Ufull
            V = V @ Ufull
            used[i] = used[j] = True
    else:
        raise RuntimeError("zero-diagonal sweep did not converge")
    return V


def optimal_unitary(s: ScatteredState, tol: float = 1e-12) -> np.ndarray:
    """Preparation unitary V0 whose 1-LOCC CFI attains the biphoton QFI.

    Zeroes the diagonal of T = Tr_S |Phi><Phi_perp| in the rotated idler
    basis; T is assembled from the Gram data and must be traceless.
    """
    if s.has_vacuum:
        raise ValueError("optimal_unitary expects a post-selected biphoton state "
                         "(no vacuum component)")
    w, G, D, E = s.r, s.G, s.D, s.E
    A = s.A
    a = A ** -0.5
    da = -0.5 * s.A_theta * A ** -1.5
    _, beta = state_overlaps(s)
    coef = np.conj(da - beta * a)
    T = a * np.outer(w, np.conj(w)) * (coef * np.conj(G) + a * np.conj(D))
    if abs(np.trace(T)) > 1e-8 * max(np.linalg.norm(T), 1e-300):
        raise ValueError("assembled Tr_S |Phi><Phi_perp| is not traceless")
    return zero_diagonal_unitary(T, tol=tol)


# ---------------------------------------------------------------------------
# reduced-signal QFI and signal-to-idler CFI
# ---------------------------------------------------------------------------

def _orthonormal_coords(s: ScatteredState, tol: float = 1e-11):
    """Coordinates of {phi_n} and {dphi_n} in an implicit orthonormal basis.

    Eigen-factorizes the stacked Gram [[G, D], [D^dag, E]] and keeps the
    numerically supported directions.
    """
    K = s.n_modes
    big = np.block([[s.G, s.D], [s.D.conj().T, s.E]])
    big = 0.5 * (big + big.conj().T)
    vals, vecs = np.linalg.eigh(big)
    keep = vals > tol * max(vals.max(), 0.0)
    X = (vecs[:, keep] * np.sqrt(vals[keep])).conj().T  # (rank, 2K)
    return X[:, :K], X[:, K:]


def reduced_signal_qfi(s: ScatteredState) -> float:
    """QFI of the reduced signal state of the pure outgoing component.

    Tr_I |Phi><Phi| = (1/A) [ |0><0| + sum |r_n|^2 |phi_n><phi_n| ] assembled
    exactly in an orthonormalized basis from the Gram data, then fed to the
    spectral mixed-state QFI.
    """
    xphi, xdphi = _orthonormal_coords(s)
    rank = xphi.shape[0]
    dim = rank + (1 if s.has_vacuum else 0)
    A = s.A
    A_th = s.A_theta
    p = np.abs(s.r) ** 2
    rho = np.zeros((dim, dim), dtype=complex)
    drho = np.zeros((dim, dim), dtype=complex)
    P = (xphi * p) @ xphi.conj().T
    M = (xdphi * p) @ xphi.conj().T
    rho[:rank, :rank] = P / A
    drho[:rank, :rank] = (M + M.conj().T) / A - (A_th / A ** 2) * P
    if s.has_vacuum:
        rho[rank, rank] = 1.0 / A
        drho[rank, rank] = -A_th / A ** 2
    return qfi_mixed_spectral(rho, drho)


def _sqrtm_psd(G: np.ndarray, tol: float = 1e-12):
    vals, vecs = np.linalg.eigh(0.5 * (G + G.conj().T))
    vals = np.clip(vals, 0.0, None)
    root = vecs @ np.diag(np.sqrt(vals)) @ vecs.conj().T
    inv_vals = np.where(vals > tol * max(vals.max(), 1e-300), 1.0 / np.sqrt(np.clip(vals, 1e-300, None)), 0.0)
    inv_root = vecs @ np.diag(inv_vals) @ vecs.conj().T
    return root, inv_root


def s2i_cfi(s: ScatteredState, W: Optional[np.ndarray] = None) -> float:
    """CFI of the measurement-optimal signal-to-idler 1-LOCC for unitary W.

    W acts on the Loewdin-orthonormalized outgoing signal basis (at
    Gamma_perp = 0 the {phi_n} are already orthonormal).  Signal outcomes
    outside span{phi_n} carry vanishing probability but contribute their
    second-order rate 4 |P_perp |dPhi>|^2, which is W-independent.
    """
    K = s.n_modes
    if W is None:
        W = np.eye(K, dtype=complex)
    W = np.asarray(W, dtype=complex)
    if W.shape != (K, K):
        raise ValueError("W must act on the orthonormalized signal space")
    if np.linalg.norm(W.conj().T @ W - np.eye(K)) > 1e-8:
        raise ValueError("W is not unitary within 1e-8")

    A = s.A
    a = A ** -0.5
    da = -0.5 * s.A_theta * A ** -1.5
    Ghalf, Ginvhalf = _sqrtm_psd(s.G)
    wdiag = np.diag(s.r)
    R = a * (W.conj().T @ Ghalf @ wdiag)               # idler coefficients per outcome
    dR = W.conj().T @ (da * Ghalf + a * Ginvhalf @ s.D) @ wdiag

    p = np.real(np.sum(np.conj(R) * R, axis=1))
    u = np.sum(np.conj(R) * dR, axis=1)

    # Completeness: summing <drho_x|drho_x> over every outcome (span basis,
    # vacuum, and the zero-probability complement of span{phi}) gives
    # <dPhi|dPhi>; the vacuum and complement outcomes carry no Im-penalty.
    dd_tot, _ = state_overlaps(s)
    mask = p > _TINY_P * max(p.max(), 1.0)
    value = 4.0 * dd_tot - 4.0 * float(np.sum(np.imag(u[mask]) ** 2 / p[mask]))
    return float(value)


# ---------------------------------------------------------------------------
# total QFI, report assembly
# ---------------------------------------------------------------------------

def classical_mixing_cfi(s: ScatteredState) -> float:
    """Fisher information of the two-outcome loss/no-loss mixing.

    C = n_theta^2 / (n (1-n)); the squared numerator follows from the
    defining variance form of the classical Fisher information.
    """
    n = s.loss
    if n <= 0.0 or n >= 1.0:
        return 0.0
    return float(s.loss_theta ** 2 / (n * (1.0 - n)))


def total_qfi(s: ScatteredState):
    """Three-term total QFI: classical mixing + loss-weighted idler + biphoton.

    Returns (q_total, c_classical, q_idler, q_biph).  At Gamma_perp = 0 only
    the biphoton term survives.
    """
    q_biph = biphoton_qfi(s)
    n = s.loss
    if s.N_raw <= 0.0:
        return q_biph, 0.0, 0.0, q_biph
    c_classical = classical_mixing_cfi(s)
    sigma, dsigma = idler_sigma(s)
    q_idler = qfi_sld(sigma, dsigma)
    q_total = c_classical + n * q_idler + (1.0 - n) * q_biph
    return float(q_total), float(c_classical), float(q_idler), float(q_biph)


def postselect_relation(s_pdc: ScatteredState, s_ps: ScatteredState) -> float:
    """Relative residual of the PDC / post-selected QFI relation.

    Q_PDC ~= Lambda Q_PS + (4/Lambda) |int dPhi* Phi|^2 for Lambda << 1;
    the integral term equals |sum |r_n|^2 <phi_n|dphi_n>|^2 of the PDC state.
    """
    if not s_pdc.has_vacuum or s_ps.has_vacuum:
        raise ValueError("expects (PDC with vacuum, post-selected) in that order")
    lam = float(np.sum(np.abs(s_pdc.r) ** 2))
    if lam > 0.1:
        raise ValueError("relation requires the weak-downconversion regime (Lambda << 1)")
    _, d_pdc, _ = s_pdc.weighted_diag_sums()
    q_pdc = biphoton_qfi(s_pdc)
    q_ps = biphoton_qfi(s_ps)
    rhs = lam * q_ps + 4.0 / lam * abs(d_pdc) ** 2
    return float(abs(q_pdc - rhs) / abs(q_pdc))


@dataclass
class FisherReport:
    """All Fisher quantities for one parameter point (units theta^-2)."""

    theta: str
    q_total: float
    c_classical: float
    q_idler: float
    q_biph: float
    q_reduced: float
    c_locc_identity: float
    c_s2i: float
    kappa: float
    varsigma: float
    loss: float
    n_modes: int
    meta: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        """Flat key-value record (one CSV row / JSON object) with metadata."""
        from dataclasses import asdict
        rec = asdict(self)
        meta = rec.pop("meta")
        rec.update({f"meta_{k}": v for k, v in meta.items()})
        return rec

    def validate(self, rel: float = 1e-9):
        """Inequality suite.

        The lower bound on the LOCC CFI is asserted non-strictly: strictness
        holds only for complete Schmidt bases, and few-mode probes (single
        mode, the TFM family at Delta = 0) sit exactly on the boundary.
        """
        errs = []
        slack = rel * max(abs(self.q_biph), 1e-300)
        if self.q_biph < 0:
            errs.append("q_biph < 0")
        if self.c_locc_identity > self.q_biph + slack:
            errs.append("c_locc_identity exceeds q_biph")
        if self.c_locc_identity < self.q_reduced - slack:
            errs.append("c_locc_identity below q_reduced")
        if not (-rel <= self.kappa <= 1.0 + rel):
            errs.append("kappa outside [0, 1]")
        if self.varsigma < 1.0 - rel:
            errs.append("varsigma below 1")
        if errs:
            raise ValueError("; ".join(errs))
        return self


def ratios(c_locc_identity: float, q_biph: float, q_reduced: float) -> Tuple[float, float]:
    """(kappa, varsigma) = degree of optimality and enhancement factor."""
    if q_biph <= 0 or q_reduced <= 0:
        raise ValueError("ratios need positive denominators")
    return c_locc_identity / q_biph, c_locc_identity / q_reduced


def report(s: ScatteredState, validate: bool = True, meta: Optional[dict] = None) -> FisherReport:
    """Full FisherReport for one scattered state."""
    q_total, c_classical, q_idler, q_biph = total_qfi(s)
    q_reduced = reduced_signal_qfi(s)
    c_id = locc_cfi(s, None)
    c_s2i = s2i_cfi(s, None)
    kappa, varsigma = ratios(c_id, q_biph, q_reduced)
    rep = FisherReport(
        theta=s.theta,
        q_total=q_total,
        c_classical=c_classical,
        q_idler=q_idler,
        q_biph=q_biph,
        q_reduced=q_reduced,
        c_locc_identity=c_id,
        c_s2i=c_s2i,
        kappa=kappa,
        varsigma=varsigma,
        loss=s.loss,
        n_modes=s.n_modes,
        meta=dict(meta or {}, grid_n=s.grid.n, theta=s.theta),
    )
    if validate:
        rep.validate()
    return rep
