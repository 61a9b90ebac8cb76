"""Biorthogonal eigenbases of the local velocity operators.

The local (per Fourier mode) linearized operators are shifted
Ornstein-Uhlenbeck generators whose eigenfunctions are parabolic cylinder
functions with a complex-shifted argument,

    eta_{k,p}(u) = z(p) D_p((u - a2) / a1),    psi_{k,p} = conj(eta_{k,p}),

normalized so that <eta_{k,p}, psi_{k,q}> = delta_{pq} with the
conjugate-linear-in-first-slot inner product <a,b> = int conj(a) b du.
Two variants are supported: the plain kinetic model ("forward") and the
game model ("mfg"), which differ in the width a1, the complex center a2
and the eigenvalue sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Literal

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import gammaln

from .config import ModelConfig
from .errors import OverflowSignal, QuadratureError

_LOG_OVERFLOW = 700.0  # exp argument ceiling in float64


def hermite_eval(p: int, v) -> np.ndarray | complex:
    """Probabilist's Hermite polynomial He_p(v) by the three-term recurrence.

    Total on finite inputs; vectorized over v.
    """
    if p < 0:
        raise ValueError("order must be nonnegative")
    varr = np.asarray(v, dtype=complex)
    h_prev = np.ones_like(varr)
    if p == 0:
        return h_prev if varr.ndim else complex(h_prev)
    h_cur = varr.copy()
    for n in range(1, p):
        h_prev, h_cur = h_cur, varr * h_cur - n * h_prev
    return h_cur if varr.ndim else complex(h_cur)


def parabolic_cylinder_D(p: int, v) -> np.ndarray | complex:
    """Parabolic cylinder function D_p(v) = exp(-v^2/4) He_p(v).

    For strongly complex arguments the Gaussian prefactor grows like
    exp(Im(v)^2/4); its exponent is formed in log-magnitude/phase form and
    an OverflowSignal is raised once it exceeds the float64 range.
    """
    varr = np.asarray(v, dtype=complex)
    expo = -varr * varr / 4.0
    if np.any(expo.real > _LOG_OVERFLOW):
        raise OverflowSignal(
            f"Gaussian prefactor exponent {float(np.max(expo.real)):.1f} exceeds float64 range"
        )
    out = np.exp(expo) * hermite_eval(p, varr)
    return out if varr.ndim else complex(out)


@dataclass(frozen=True)
class BasisFamily:
    """One Fourier mode's eigenfamily of the local velocity operator.

    a1 is the real width scale, a2 the complex center shift, z the
    normalization sequence. alpha[p] are the eigenvalues of the first local
    operator (density side); beta[p] = -conj(alpha[p]) those of the second
    (value-function side, mfg variant).
    """

    k: int
    xi: float
    a1: float
    a2: complex
    P: int
    variant: Literal["forward", "mfg"]
    l: float
    sigma: float
    r: float
    z: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def eta(self, p: int, u) -> np.ndarray | complex:
        """Eigenfunction eta_{k,p}(u) = z(p) D_p((u - a2)/a1)."""
        if p >= len(self.z):
            raise ValueError(f"order p={p} beyond truncation P={self.P}")
        varr = (np.asarray(u, dtype=complex) - self.a2) / self.a1
        out = self.z[p] * parabolic_cylinder_D(p, varr)
        return out if np.asarray(u).ndim else complex(out)

    def psi(self, p: int, u) -> np.ndarray | complex:
        """Adjoint eigenfunction psi_{k,p}(u) = conj(eta_{k,p}(u)) for real u."""
        return np.conj(self.eta(p, np.asarray(u, dtype=float)))

    def quadrature(self, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Hermite nodes in u and re-expanded weights for int f(u) du.

        The Gaussian factor of the rule is absorbed into the weights, so
        plain weighted sums approximate unweighted integrals of functions
        decaying at least like exp(-(u-xi)^2/(2 a1^2)).
        """
        n = n if n is not None else max(4 * self.P, 80)
        s, w = _hermegauss_cached(n)
        u = self.xi + self.a1 * s
        weights = w * np.exp(s * s / 2.0) * self.a1
        return u, weights


@lru_cache(maxsize=32)
def _hermegauss_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n > 350:
        raise QuadratureError("node count > 350 overflows the reweighted rule in float64")
    s, w = hermegauss(n)
    return s, w


def make_basis(cfg: ModelConfig, xi: float, k: int,
               variant: Literal["forward", "mfg"] = "forward",
               n_extra: int = 3) -> BasisFamily:
    """Construct the eigenfamily for Fourier mode k around mean speed xi.

    n_extra additional orders beyond P are tabulated because recurrence
    formulas for derivatives and u-multiplication reach two orders up.
    """
    l, sigma, r = cfg.l, cfg.sigma, cfg.r
    if variant == "forward":
        a1 = sigma / np.sqrt(2.0)
        a2 = xi - 2j * k * np.pi * sigma**2 / l
        c2 = -2.0 * np.pi**2 * k**2 * sigma**2 / l**2 - 2j * k * np.pi * xi / l
        alpha = np.array([-p + c2 for p in range(cfg.P + n_extra)])
    elif variant == "mfg":
        a1 = sigma * r**0.25 / np.sqrt(2.0)
        a2 = xi - 2j * k * np.pi * r * sigma**2 / l
        alpha = np.array(
            [-p / np.sqrt(r) - 2.0 * np.pi**2 * k**2 * sigma**2 * r / l**2
             - 2j * np.pi * k * xi / l for p in range(cfg.P + n_extra)]
        )
    else:
        raise ValueError(f"unknown variant {variant!r}")
    beta = -np.conj(alpha)
    p_arr = np.arange(cfg.P + n_extra, dtype=float)
    # z(p) = (sqrt(2 pi) a1 p!)^(-1/2), factorial via log-gamma
    z = np.exp(-0.5 * (0.5 * np.log(2.0 * np.pi) + np.log(a1) + gammaln(p_arr + 1.0)))
    return BasisFamily(k=k, xi=xi, a1=a1, a2=a2, P=cfg.P, variant=variant,
                       l=l, sigma=sigma, r=r, z=z, alpha=alpha, beta=beta)


def inner_product(f: Callable, g: Callable, basis: BasisFamily,
                  n: int | None = None, rtol: float = 1e-9) -> complex:
    """<f, g> = int conj(f(u)) g(u) du by reweighted Gauss-Hermite quadrature.

    Conjugate-linear in the first argument. The result is validated by a
    node-doubling consistency check; disagreement beyond rtol raises
    QuadratureError (integrand too wide or too oscillatory for the rule).
    """
    n = n if n is not None else max(4 * basis.P, 80)
    u1, w1 = basis.quadrature(n)
    val1 = np.sum(w1 * np.conj(f(u1)) * g(u1))
    u2, w2 = basis.quadrature(2 * n)
    val2 = np.sum(w2 * np.conj(f(u2)) * g(u2))
    if abs(val2 - val1) > rtol * (1.0 + abs(val2)):
        raise QuadratureError(
            f"doubling check failed: |I_2n - I_n| = {abs(val2 - val1):.3e} at n={n}"
        )
    return complex(val2)


def eta_node_table(basis: BasisFamily, n_orders: int, u: np.ndarray) -> np.ndarray:
    """Values eta_p(u_i) for p < n_orders as an (n_orders, len(u)) array.

    Uses the D_p recurrence once per node set instead of per-order calls.
    """
    v = (u.astype(complex) - basis.a2) / basis.a1
    gauss = np.exp(-v * v / 4.0)
    out = np.empty((n_orders, u.size), dtype=complex)
    h_prev = np.ones_like(v)
    out[0] = basis.z[0] * gauss * h_prev
    if n_orders == 1:
        return out
    h_cur = v.copy()
    out[1] = basis.z[1] * gauss * h_cur
    for p in range(1, n_orders - 1):
        h_prev, h_cur = h_cur, v * h_cur - p * h_prev
        out[p + 1] = basis.z[p + 1] * gauss * h_cur
    return out


def biorthogonality_matrix(basis: BasisFamily, n: int | None = None) -> np.ndarray:
    """Matrix of <eta_p, psi_q> for p, q < P; should be the identity."""
    u, w = basis.quadrature(n)
    E = eta_node_table(basis, basis.P, u)
    return (np.conj(E) * w) @ np.conj(E).T


def _fd_second_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Eighth-order central finite-difference second derivative (interior)."""
    c = np.array([-1.0 / 560, 8.0 / 315, -1.0 / 5, 8.0 / 5,
                  -205.0 / 72, 8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560])
    out = np.zeros_like(f)
    for j, cj in enumerate(c):
        sl = slice(j, f.size - 8 + j) if j < 8 else slice(8, f.size)
        out[4:-4] += cj * f[sl]
    return out / h**2


def verify_local_eigenpair(basis: BasisFamily, p: int,
                           n_grid: int = 6001, half_width: float = 12.0) -> float:
    """Relative residual || L eta_p - alpha_p eta_p || / || eta_p ||.

    The local operator is applied independently of the eigenrelation:
    pointwise multiplication for the potential and high-order finite
    differences on a uniform grid for the second derivative, so a wrong
    width, shift, or eigenvalue shows up directly.
    """
    if p >= basis.P:
        raise ValueError(f"order p={p} beyond truncation P={basis.P}")
    u = np.linspace(basis.xi - half_width * basis.a1,
                    basis.xi + half_width * basis.a1, n_grid)
    step = u[1] - u[0]
    f = basis.eta(p, u)
    d2 = _fd_second_derivative(f, step)
    l, sigma, r, k, xi = basis.l, basis.sigma, basis.r, basis.k, basis.xi
    if basis.variant == "forward":
        pot = -2j * np.pi * k * u / l - ((u - xi) ** 2 - sigma**2) / (2.0 * sigma**2)
    else:
        pot = -2j * np.pi * k * u / l - ((u - xi) ** 2 - np.sqrt(r) * sigma**2) / (2.0 * r * sigma**2)
    Lf = pot * f + 0.5 * sigma**2 * d2
    core = slice(4, -4)
    resid = Lf[core] - basis.alpha[p] * f[core]
    return float(np.linalg.norm(resid) / np.linalg.norm(f[core]))
