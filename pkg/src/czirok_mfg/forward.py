"""Linear stability of the plain kinetic model's homogeneous equilibria.

Per spatial Fourier mode k the linearized operator is a diagonal local part
(eigenvalues alpha_{k,p}) plus a rank-one nonlocal coupling built from the
functions g0 and s. The spectrum comes from a dense eigensolve of the
Galerkin matrix; the resolvent-based characteristic function serves as an
independent cross-check, and the critical noise sigma_c is located by
bisection on the stability flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisFamily, eta_node_table, make_basis
from .config import EPS_STAB, ModelConfig
from .equilibrium import CouplingFunctions, Equilibrium, make_coupling
from .errors import BracketError, PoleError, QuadratureError


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of one linearized Fourier mode, sorted by real part."""

    k: int
    eigenvalues: np.ndarray
    leading: complex
    stable: bool


def coupling_vectors(cfg: ModelConfig, eq: Equilibrium, k: int,
                     coupling: CouplingFunctions | None = None,
                     check: bool = True) -> tuple[BasisFamily, np.ndarray, np.ndarray]:
    """Quadrature of <psi_q, g0> and <s, eta_p> for all orders below P.

    With check=True the integrals are recomputed at doubled node count and
    compared, which catches an under-resolved quadrature.
    """
    basis = make_basis(cfg, eq.xi, k, "forward")
    cpl = coupling if coupling is not None else make_coupling(cfg, eq, k)

    def vectors(n):
        u, w = basis.quadrature(n)
        E = eta_node_table(basis, cfg.P, u)
        uvec = E @ (w * cpl.g0(u))     # <psi_q, g0> = int eta_q g0 du
        vvec = E @ (w * cpl.s(u))      # <s, eta_p> = int s eta_p du
        return uvec, vvec

    n0 = cfg.quad_nodes
    uvec, vvec = vectors(n0)
    if check:
        uvec2, vvec2 = vectors(2 * n0)
        err = max(np.abs(uvec2 - uvec).max(), np.abs(vvec2 - vvec).max())
        if err > 1e-9 * (1.0 + max(np.abs(uvec2).max(), np.abs(vvec2).max())):
            raise QuadratureError(f"coupling integrals not converged at {n0} nodes (dev {err:.2e})")
        uvec, vvec = uvec2, vvec2
    return basis, uvec, vvec


def assemble_forward_operator(cfg: ModelConfig, eq: Equilibrium, k: int,
                              coupling: CouplingFunctions | None = None) -> np.ndarray:
    """P x P Galerkin matrix diag(alpha_{k,p}) + <psi_q,g0> <s,eta_p>."""
    basis, uvec, vvec = coupling_vectors(cfg, eq, k, coupling)
    return np.diag(basis.alpha[: cfg.P]) + np.outer(uvec, vvec)


def forward_characteristic_residual(lam: complex, cfg: ModelConfig, eq: Equilibrium,
                                    k: int, coupling: CouplingFunctions | None = None) -> complex:
    """Value of 1 - sum_p <eta_q-bar, g0><eta_p-bar, s> / (lam - alpha_{k,p}).

    Zero exactly at eigenvalues of the assembled operator that are not
    local-operator poles; a PoleError is raised within 1e-10 of any pole.
    """
    basis, uvec, vvec = coupling_vectors(cfg, eq, k, coupling)
    dist = np.abs(lam - basis.alpha[: cfg.P])
    if dist.min() < 1e-10:
        raise PoleError(f"lambda within {dist.min():.1e} of a local eigenvalue")
    return complex(1.0 - np.sum(uvec * vvec / (lam - basis.alpha[: cfg.P])))


def forward_spectrum(cfg: ModelConfig, eq: Equilibrium, k: int,
                     coupling: CouplingFunctions | None = None) -> Spectrum:
    """Dense eigendecomposition of the mode-k operator with stability flag.

    At k = 0 total mass is conserved and the matrix carries a structural
    zero row for the ground mode, so classification is restricted to the
    mass-preserving subspace (all orders p >= 1); the neutral eigenvalue is
    still reported in the spectrum.
    """
    M = assemble_forward_operator(cfg, eq, k, coupling)
    eig_all = np.linalg.eigvals(M)
    order = np.argsort(-eig_all.real)
    eig_sorted = eig_all[order]
    if k == 0:
        eig_class = np.linalg.eigvals(M[1:, 1:])
    else:
        eig_class = eig_all
    lead = eig_class[np.argmax(eig_class.real)]
    return Spectrum(k=k, eigenvalues=eig_sorted, leading=complex(lead),
                    stable=bool(lead.real < -EPS_STAB))


def critical_sigma(cfg: ModelConfig, k: int, sigma_lo: float, sigma_hi: float,
                   tol: float = 1e-3) -> float:
    """Bisect the noise intensity at which mode k changes stability.

    Uses the ordered equilibrium at each sigma (it moves with nothing here;
    xi depends only on h). Raises BracketError when both endpoints are on
    the same side.
    """
    from .equilibrium import ordered_equilibrium

    def unstable(sig: float) -> bool:
        cfg_s = cfg.with_(sigma=sig)
        eq = ordered_equilibrium(cfg_s)
        return not forward_spectrum(cfg_s, eq, k).stable

    lo_unstable = unstable(sigma_lo)
    hi_unstable = unstable(sigma_hi)
    if lo_unstable == hi_unstable:
        state = "unstable" if lo_unstable else "stable"
        raise BracketError(
            f"no stability change in [{sigma_lo}, {sigma_hi}]: both endpoints {state}"
        )
    lo, hi = sigma_lo, sigma_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if unstable(mid) == lo_unstable:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
