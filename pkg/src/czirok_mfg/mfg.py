"""Linearized forward-backward system per Fourier mode and its stability.

The coefficient dynamics [Y1', Y2'] = N [Y1, Y2] couple the density
expansion (eta side) to the value-function expansion (psi side) through
four blocks: diagonal A1 and B2 = -A1*, the Hermitian B1 from the
self-adjoint local operator, and the rank-one cost coupling A2. N is
similar to its Hermitian-symmetrized version N_s, a Hamiltonian matrix, so
the spectrum is symmetric about the imaginary axis. When no eigenvalue
sits on the axis, the stabilizing Riccati solution extracted from an
ordered Schur form of N_s decouples the two-point boundary value problem
and yields the unique decaying solution; the critical control cost r_c is
where an eigenvalue pair collides on the axis.

Numerical note: the complex-shifted psi family is strongly non-orthogonal
(Gram entries grow exponentially with the order and the shift), so all
blocks are assembled in a norm-balanced rescaling of the basis pair,
eta_p -> d_p eta_p and psi_p -> psi_p / d_p with d_p = ||psi_p||^(1/2).
The rescaling is a diagonal similarity: it leaves A1, B2 and every
spectral statement unchanged, keeps B1 Hermitian and A2 rank one, and is
what makes float64 reach the tolerances used here. The scale vector is
carried on the blocks object.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .basis import BasisFamily, eta_node_table, make_basis
from .config import (COND_INIT_MAX, EPS_IM_RICCATI, V11_COND_MAX, ModelConfig,
                     eps_axis)
from .equilibrium import CouplingFunctions, Equilibrium, make_coupling, mfg_equilibrium
from .errors import (BracketError, IllConditionedError, OnAxisEigenvalueError,
                     PoleError, QuadratureError)
from .forward import Spectrum

_SCALING_EXPONENT = 0.5  # geometric-mean balance between the A2 and B1 blocks


@dataclass(frozen=True)
class LinearizedBlocks:
    """Blocks of the linearized forward-backward mode in the balanced basis.

    scale[p] is the diagonal rescaling applied to order p; avec and bvec
    are the (rescaled) coupling vectors with A2 = -outer(avec, bvec).
    b1_asym and b1_route_dev record the Hermiticity deviation of B1 before
    symmetrization and the disagreement of its two assembly routes.
    """

    k: int
    P: int
    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    N: np.ndarray
    Ns: np.ndarray
    scale: np.ndarray
    avec: np.ndarray
    bvec: np.ndarray
    basis: BasisFamily
    b1_asym: float
    b1_route_dev: float

    @property
    def J(self) -> np.ndarray:
        P = self.P
        return np.block([[np.zeros((P, P)), np.eye(P)], [-np.eye(P), np.zeros((P, P))]])


def assemble_blocks(cfg: ModelConfig, eq: Equilibrium, k: int,
                    coupling: CouplingFunctions | None = None,
                    route_tol: float = 1e-7) -> LinearizedBlocks:
    """Assemble A1, A2, B1, B2 and the composite matrices N, N_s.

    B1 is computed two ways and cross-checked: directly, applying the
    self-adjoint local operator through the derivative recurrences of the
    cylinder functions, and semi-analytically through the operator's
    eigenrelation plus the three-term recurrence for u * psi_p, which needs
    only the psi-family Gram matrix. Disagreement beyond route_tol
    (relative to the block magnitude) indicates a mis-scaled basis.
    """
    P = cfg.P
    basis = make_basis(cfg, eq.xi, k, "mfg")
    cpl = coupling if coupling is not None else make_coupling(cfg, eq, k)
    u, w = basis.quadrature(cfg.quad_nodes)
    E = eta_node_table(basis, P + 2, u)

    norms = np.sqrt(np.real((np.conj(E) * w) @ E.T).diagonal())
    d = norms ** _SCALING_EXPONENT

    avec = d[:P] * ((np.conj(E[:P]) * w) @ cpl.g(u))   # <eta_q, g>, rescaled
    bvec = d[:P] * (E[:P] @ (w * cpl.s(u)))            # <s, eta_p>, rescaled
    A1 = np.diag(basis.alpha[:P])
    B2 = np.diag(basis.beta[:P])
    A2 = -np.outer(avec, bvec)

    r, sigma, xi, l = cfg.r, cfg.sigma, eq.xi, cfg.l
    pot = ((u - xi) ** 2 - np.sqrt(r) * sigma**2) / (2.0 * r * sigma**2)
    E_row = E[:P] / d[:P, None]          # projection onto the rescaled eta side
    psi = np.conj(E)                     # psi_p values (unscaled)

    # route 1: apply L-tilde pointwise; psi'' via D recurrences
    # D_p'' = [p(p-1) D_{p-2} - (2p+1) D_p + D_{p+2}] / 4 carried over to psi
    B1 = np.empty((P, P), dtype=complex)
    zr = basis.z
    for p in range(P):
        lead = zr[p] / zr[p + 2]
        d2 = -(2 * p + 1) * psi[p] + psi[p + 2] * lead
        if p >= 2:
            d2 = d2 + p * (p - 1) * psi[p - 2] * (zr[p] / zr[p - 2])
        d2 = d2 / (4.0 * basis.a1**2)
        Lpsi = pot * psi[p] - 0.5 * sigma**2 * d2
        B1[:, p] = (-1.0 / (r * sigma**2)) * (E_row @ (w * Lpsi)) / d[p]

    # route 2: L-tilde psi_p = (beta_p + i 2 pi k a2bar / l) psi_p
    #          + (i 2 pi k a1 / l)(sqrt(p+1) psi_{p+1} + sqrt(p) psi_{p-1})
    G = np.empty((P, P + 1), dtype=complex)
    for p in range(P + 1):
        G[:, p] = (E_row @ (w * psi[p])) / d[p]
    ca = 2j * np.pi * k / l
    B1_alt = np.empty((P, P), dtype=complex)
    for p in range(P):
        col = (basis.beta[p] + ca * np.conj(basis.a2)) * G[:, p] \
            + ca * basis.a1 * np.sqrt(p + 1.0) * G[:, p + 1] * (d[p] / d[p + 1])
        if p >= 1:
            col = col + ca * basis.a1 * np.sqrt(float(p)) * G[:, p - 1] * (d[p] / d[p - 1])
        B1_alt[:, p] = (-1.0 / (r * sigma**2)) * col

    b1_scale = 1.0 + np.abs(B1).max()
    route_dev = float(np.abs(B1 - B1_alt).max() / b1_scale)
    if route_dev > route_tol:
        raise QuadratureError(
            f"B1 assembly routes disagree by {route_dev:.2e} (relative); "
            "basis width/shift or eigenvalue scaling is off"
        )
    b1_asym = float(np.abs(B1 - B1.conj().T).max())
    B1 = 0.5 * (B1 + B1.conj().T)

    Cs = 0.5 * (A2 + A2.conj().T)
    N = np.block([[A1, B1], [A2, B2]])
    Ns = np.block([[A1, B1], [Cs, B2]])
    return LinearizedBlocks(k=k, P=P, A1=A1, A2=A2, B1=B1, B2=B2, N=N, Ns=Ns,
                            scale=d[:P], avec=avec, bvec=bvec, basis=basis,
                            b1_asym=b1_asym, b1_route_dev=route_dev)


def mfg_spectrum(cfg: ModelConfig, eq: Equilibrium, k: int,
                 blocks: LinearizedBlocks | None = None) -> Spectrum:
    """All 2P eigenvalues of N for mode k, sorted by descending real part."""
    blk = blocks if blocks is not None else assemble_blocks(cfg, eq, k)
    eig = np.linalg.eigvals(blk.N)
    order = np.argsort(-eig.real)
    eig = eig[order]
    tol = eps_axis(float(np.abs(eig).max()))
    stable = bool(np.all(np.abs(eig.real) > tol))
    return Spectrum(k=k, eigenvalues=eig, leading=complex(eig[0]), stable=stable)


def mfg_characteristic_residual(lam: complex, cfg: ModelConfig, eq: Equilibrium,
                                k: int, blocks: LinearizedBlocks | None = None) -> complex:
    """Resolvent characteristic function of the coupled mode at lam.

    1 - (1/(r sigma^2)) sum_{p,q} <eta_p-bar,s><psi_q-bar,g><eta_p-bar, L psi_q>
        / ((alpha_p - lam)(beta_q - lam))
    evaluated through the assembled blocks; the balanced rescaling cancels
    in the triple products. Vanishes at eigenvalues of N away from the
    local eigenvalue poles.
    """
    blk = blocks if blocks is not None else assemble_blocks(cfg, eq, k)
    alpha = blk.basis.alpha[: cfg.P]
    beta = blk.basis.beta[: cfg.P]
    dmin = min(np.abs(lam - alpha).min(), np.abs(lam - beta).min())
    if dmin < 1e-10:
        raise PoleError(f"lambda within {dmin:.1e} of a local eigenvalue")
    # b^T (A1-lam)^-1 B1 (B2-lam)^-1 a with the rank-one sign folded in
    left = blk.bvec / (alpha - lam)
    right = blk.avec / (beta - lam)
    return complex(1.0 + left @ blk.B1 @ right)


@dataclass(frozen=True)
class RiccatiSolution:
    """Stabilizing Riccati data for one mode, in the balanced basis.

    X_plus is the Hermitian stabilizing root, A_c = A1 + B1 X_plus the
    closed-loop matrix, P_sim the similarity with N_s = P_sim^-1 N P_sim
    obtained from matched eigendecompositions (its conjugation residual is
    reported relative to ||N||). W spans the stable invariant subspace of N
    itself (orthonormal columns from an ordered Schur form); the BVP
    propagates in that basis, and cond_init = cond(W[:P]) is the
    invertibility measure of the initial-condition map.
    """

    X_plus: np.ndarray
    A_c: np.ndarray
    P_sim: np.ndarray
    psim_residual: float
    W: np.ndarray
    T11: np.ndarray
    care_residual: float
    herm_deviation: float
    cond_V11: float
    cond_init: float
    cond_init_psim: float
    blocks: LinearizedBlocks = field(repr=False)


def _stable_subspace(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    T, Z, sdim = sla.schur(M, output="complex", sort=lambda z: z.real < 0)
    return T, Z, sdim


def stabilizing_solution(blocks: LinearizedBlocks) -> RiccatiSolution:
    """Hermitian stabilizing Riccati solution via ordered Schur vectors.

    Requires the spectrum to stay clear of the imaginary axis; raises
    OnAxisEigenvalueError otherwise (stability is then undecidable by this
    route) and IllConditionedError when the Schur-vector block V11 is too
    ill-conditioned to invert reliably.
    """
    P = blocks.P
    eig = np.linalg.eigvals(blocks.N)
    if np.abs(eig.real).min() < EPS_IM_RICCATI:
        raise OnAxisEigenvalueError(
            f"eigenvalue within {np.abs(eig.real).min():.2e} of the imaginary axis"
        )
    T, Z, sdim = _stable_subspace(blocks.Ns)
    if sdim != P:
        raise OnAxisEigenvalueError(f"expected {P} stable eigenvalues, Schur sort found {sdim}")
    V11 = Z[:P, :P]
    V21 = Z[P:, :P]
    cond_V11 = float(np.linalg.cond(V11))
    if cond_V11 > V11_COND_MAX:
        raise IllConditionedError(f"Schur block V11 condition {cond_V11:.2e}")
    X = V21 @ np.linalg.inv(V11)
    herm_dev = float(np.abs(X - X.conj().T).max())
    X = 0.5 * (X + X.conj().T)
    Cs = 0.5 * (blocks.A2 + blocks.A2.conj().T)
    care = X @ blocks.A1 - blocks.B2 @ X + X @ blocks.B1 @ X - Cs
    A_c = blocks.A1 + blocks.B1 @ X

    # similarity N_s = P_sim^-1 N P_sim from matched eigendecompositions;
    # near-degenerate clusters make individual eigenvectors unreliable, so
    # the conjugation residual is carried as a diagnostic.
    wN, VN = np.linalg.eig(blocks.N)
    wS, VS = np.linalg.eig(blocks.Ns)
    cost = np.abs(wN[:, None] - wS[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(2 * P, dtype=int)
    perm[cols] = rows
    P_sim = VN[:, perm] @ np.linalg.inv(VS)
    psim_res = float(np.abs(np.linalg.inv(P_sim) @ blocks.N @ P_sim - blocks.Ns).max()
                     / (1.0 + np.abs(blocks.N).max()))

    TN, ZN, sdimN = _stable_subspace(blocks.N)
    if sdimN != P:
        raise OnAxisEigenvalueError(f"N stable subspace has dimension {sdimN}, expected {P}")
    W = ZN[:, :P]
    T11 = TN[:P, :P]
    cond_init = float(np.linalg.cond(W[:P, :]))
    M_init = P_sim[:P, :P] + P_sim[:P, P:] @ X
    cond_init_psim = float(np.linalg.cond(M_init))

    return RiccatiSolution(X_plus=X, A_c=A_c, P_sim=P_sim, psim_residual=psim_res,
                           W=W, T11=T11,
                           care_residual=float(np.abs(care).max()),
                           herm_deviation=herm_dev, cond_V11=cond_V11,
                           cond_init=cond_init, cond_init_psim=cond_init_psim,
                           blocks=blocks)


@dataclass(frozen=True)
class BVPTrajectory:
    """Decaying solution of the two-point problem with Y1(0) prescribed."""

    times: np.ndarray
    Y1: np.ndarray          # (nt, P)
    Y2: np.ndarray
    Z1: np.ndarray
    Z2: np.ndarray


def bvp_solve(blocks: LinearizedBlocks, sol: RiccatiSolution,
              Y10: np.ndarray, times: np.ndarray) -> BVPTrajectory:
    """Propagate the unique decaying solution through the stable subspace.

    The trajectory lies in the stable invariant subspace of N: with
    orthonormal basis W and restriction T11,  Y(t) = W exp(T11 t) c,
    c = W1^-1 Y10, which equals the closed-loop formula
    (P11 + P12 X_+) exp(A_c t) (P11 + P12 X_+)^-1 Y10 written in a better
    conditioned basis. Z are the decoupled coordinates from the Riccati
    change of variables; Z2 vanishes along constructed solutions.
    """
    P = blocks.P
    W1 = sol.W[:P, :]
    if sol.cond_init > COND_INIT_MAX:
        raise IllConditionedError(
            f"initial-condition map condition {sol.cond_init:.2e} exceeds {COND_INIT_MAX:.0e}"
        )
    c0 = np.linalg.solve(W1, np.asarray(Y10, dtype=complex))
    times = np.asarray(times, dtype=float)
    # exp(T11 t) via eigendecomposition when safe, Schur-Parlett otherwise
    wT, VT = np.linalg.eig(sol.T11)
    use_eig = np.linalg.cond(VT) < 1e8
    Y = np.empty((times.size, 2 * P), dtype=complex)
    for i, t in enumerate(times):
        if use_eig:
            Et = (VT * np.exp(wT * t)) @ np.linalg.solve(VT, c0)
        else:
            Et = sla.expm(sol.T11 * t) @ c0
        Y[i] = sol.W @ Et
    Y1, Y2 = Y[:, :P], Y[:, P:]
    # decoupled coordinates: Z = U^-1 P_sim^-1 Y
    PU_inv_top = np.linalg.inv(sol.P_sim)
    Zfull = (PU_inv_top @ Y.T)
    Z1 = Zfull[:P, :].T
    Z2 = (Zfull[P:, :] - sol.X_plus @ Zfull[:P, :]).T
    return BVPTrajectory(times=times, Y1=Y1, Y2=Y2, Z1=Z1, Z2=Z2)


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of the closed-loop stability decision for one mode."""

    verdict: str            # "stable" | "unstable-or-undecidable"
    reason: str
    axis_distance: float
    axis_tolerance: float
    cond_init: float | None


def stability_verdict(cfg: ModelConfig, eq: Equilibrium, k: int,
                      blocks: LinearizedBlocks | None = None) -> StabilityReport:
    """Decide closed-loop linear stability of the homogeneous game state.

    Stable exactly when no eigenvalue of N lies within the axis tolerance
    of the imaginary axis and the initial-condition map is invertible at
    condition below 1e10; otherwise the failing condition is named.
    """
    blk = blocks if blocks is not None else assemble_blocks(cfg, eq, k)
    eig = np.linalg.eigvals(blk.N)
    tol = eps_axis(float(np.abs(eig).max()))
    dist = float(np.abs(eig.real).min())
    if dist < tol:
        return StabilityReport(verdict="unstable-or-undecidable",
                               reason=f"eigenvalue within {dist:.2e} of the imaginary axis "
                                      f"(tolerance {tol:.2e})",
                               axis_distance=dist, axis_tolerance=tol, cond_init=None)
    try:
        sol = stabilizing_solution(blk)
    except (OnAxisEigenvalueError, IllConditionedError) as exc:
        return StabilityReport(verdict="unstable-or-undecidable", reason=str(exc),
                               axis_distance=dist, axis_tolerance=tol, cond_init=None)
    if sol.cond_init > COND_INIT_MAX:
        return StabilityReport(verdict="unstable-or-undecidable",
                               reason=f"initial-condition map condition {sol.cond_init:.2e}",
                               axis_distance=dist, axis_tolerance=tol,
                               cond_init=sol.cond_init)
    return StabilityReport(verdict="stable", reason="spectrum clear of axis and "
                           "initial-condition map well conditioned",
                           axis_distance=dist, axis_tolerance=tol, cond_init=sol.cond_init)


def on_axis_count(cfg: ModelConfig, eq: Equilibrium, k: int) -> int:
    """Number of eigenvalues of N within the axis tolerance."""
    blk = assemble_blocks(cfg, eq, k)
    eig = np.linalg.eigvals(blk.N)
    tol = eps_axis(float(np.abs(eig).max()))
    return int(np.sum(np.abs(eig.real) < tol))


def critical_r(cfg: ModelConfig, k: int, r_lo: float, r_hi: float,
               tol: float = 1e-3) -> float:
    """Bisect the control cost at which an eigenvalue pair lands on the axis.

    The indicator is the on-axis eigenvalue count (the collision happens on
    the axis, so the max real part does not change sign there). Requires
    on-axis eigenvalues at r_lo and none at r_hi.
    """

    def has_axis(r: float) -> bool:
        cfg_r = cfg.with_(r=r)
        return on_axis_count(cfg_r, mfg_equilibrium(cfg_r), k) > 0

    lo_axis, hi_axis = has_axis(r_lo), has_axis(r_hi)
    if not lo_axis or hi_axis:
        raise BracketError(
            f"invalid bracket [{r_lo}, {r_hi}]: on-axis present = ({lo_axis}, {hi_axis}); "
            "need on-axis at r_lo and none at r_hi"
        )
    lo, hi = r_lo, r_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if has_axis(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rc_sweep(cfg: ModelConfig, sigma_list: list[float], k: int,
             r_lo: float = 0.05, r_hi_start: float = 1.4,
             r_hi_max: float = 6.0) -> list[dict]:
    """Critical control cost across noise intensities with auto-bracketing.

    The upper bracket end is grown geometrically until the spectrum clears
    the axis (it tightens as sigma grows, so a fixed bracket would fail).
    Per-point failures are recorded and the sweep continues.
    """
    rows = []
    for sigma in sigma_list:
        cfg_s = cfg.with_(sigma=sigma)
        entry: dict = {"sigma": sigma, "r_c": None, "error": None}
        try:
            r_hi = r_hi_start
            while r_hi <= r_hi_max:
                cfg_r = cfg_s.with_(r=r_hi)
                if on_axis_count(cfg_r, mfg_equilibrium(cfg_r), k) == 0:
                    break
                r_hi *= 1.5
            else:
                raise BracketError(f"no axis-free r found up to {r_hi_max}")
            entry["r_c"] = critical_r(cfg_s, k, r_lo, r_hi)
        except Exception as exc:  # keep sweeping on per-point failure
            entry["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(entry)
    return rows
