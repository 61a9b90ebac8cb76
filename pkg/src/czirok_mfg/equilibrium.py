"""Spatially homogeneous equilibria and the coupling ingredients.

The alignment force G(u) = (h+1)u/5 - h u^3/125 has fixed points G(xi) = xi
at xi = 0 (disordered) and, for h > 4, xi = +-5 sqrt((h-4)/h) (ordered).
Both the plain kinetic model and the game variant share these mean speeds;
they differ in the variance of the Gaussian velocity profile and, for the
game, in the stationary value function and average cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .config import ModelConfig
from .errors import CzirokMFGError


def G(u, h: float):
    """Preferred-speed map G(u) = (h+1)u/5 - h u^3/125."""
    u = np.asarray(u, dtype=float) if np.ndim(u) else u
    return (h + 1.0) / 5.0 * u - h / 125.0 * u**3


def G_prime(u, h: float):
    return (h + 1.0) / 5.0 - 3.0 * h / 125.0 * u**2


def mean_speed_equilibria(h: float) -> list[float]:
    """All roots of G(xi) = xi: {0} for h <= 4, else {0, +xi, -xi}.

    The nonzero root has the closed form xi = 5 sqrt((h-4)/h).
    """
    if h <= 0:
        raise ValueError(f"interaction strength must be positive, got h={h}")
    if h <= 4.0:
        return [0.0]
    xi = 5.0 * np.sqrt((h - 4.0) / h)
    return [0.0, xi, -xi]


def kernel_fourier(k: int, l: float) -> float:
    """Fourier coefficient phi_k of the top-hat interaction kernel.

    phi = (l/2) 1_{[0,1]} on torus distance, normalized so phi_0 = 1;
    for k != 0, phi_k = l sin(2 pi k / l) / (2 pi k). Requires l > 2 so the
    kernel support fits the domain.
    """
    if l <= 2.0:
        raise CzirokMFGError(f"domain l={l} too small for the unit-range kernel")
    if k == 0:
        return 1.0
    return float(l * np.sin(2.0 * np.pi * k / l) / (2.0 * np.pi * k))


@dataclass(frozen=True)
class Equilibrium:
    """A spatially homogeneous steady state.

    The velocity profile is F_xi, a Gaussian centered at xi whose variance
    is sigma^2/2 for the forward model and sqrt(r) sigma^2/2 for the game;
    `s2` stores twice that variance (the exponent scale in exp(-(u-xi)^2/s2)).
    chi is the game's minimum average cost sigma^2 sqrt(r), None otherwise.
    """

    xi: float
    kind: Literal["disordered", "ordered"]
    s2: float
    l: float
    chi: float | None = None
    sqrt_r: float | None = None

    def F(self, u):
        """Normalized Gaussian velocity profile F_xi(u)."""
        return np.exp(-(np.asarray(u, dtype=float) - self.xi) ** 2 / self.s2) / np.sqrt(np.pi * self.s2)

    def sqrtF(self, u):
        return np.exp(-(np.asarray(u, dtype=float) - self.xi) ** 2 / (2.0 * self.s2)) / (np.pi * self.s2) ** 0.25

    def rho(self, u):
        """Phase-space density rho_xi = F_xi / l."""
        return self.F(u) / self.l

    def h_value(self, u):
        """Stationary relative value function sqrt(r) (u - xi)^2 (game only)."""
        if self.sqrt_r is None:
            raise CzirokMFGError("value function only defined for the game equilibrium")
        return self.sqrt_r * (np.asarray(u, dtype=float) - self.xi) ** 2


def forward_equilibria(cfg: ModelConfig) -> list[Equilibrium]:
    """Equilibria of the plain kinetic model at the configured parameters."""
    out = []
    for xi in mean_speed_equilibria(cfg.h):
        kind = "disordered" if xi == 0.0 else "ordered"
        out.append(Equilibrium(xi=xi, kind=kind, s2=cfg.sigma**2, l=cfg.l))
    return out


def ordered_equilibrium(cfg: ModelConfig, sign: int = +1) -> Equilibrium:
    """The ordered equilibrium with the given sign of the mean speed."""
    eqs = [e for e in forward_equilibria(cfg) if e.kind == "ordered"]
    if not eqs:
        raise CzirokMFGError(f"no ordered equilibrium for h={cfg.h} <= 4")
    return eqs[0] if sign > 0 else eqs[1]


def mfg_equilibrium(cfg: ModelConfig, sign: int = +1) -> Equilibrium:
    """Stationary solution of the game: density, value function and cost.

    rho = F/l with variance sqrt(r) sigma^2/2, h(u) = sqrt(r)(u - xi)^2 and
    average cost chi = sigma^2 sqrt(r).
    """
    roots = mean_speed_equilibria(cfg.h)
    ordered = [x for x in roots if x != 0.0]
    if not ordered:
        raise CzirokMFGError(f"no ordered equilibrium for h={cfg.h} <= 4")
    xi = max(ordered) if sign > 0 else min(ordered)
    return Equilibrium(xi=xi, kind="ordered", s2=np.sqrt(cfg.r) * cfg.sigma**2,
                       l=cfg.l, chi=cfg.sigma**2 * np.sqrt(cfg.r), sqrt_r=np.sqrt(cfg.r))


@dataclass(frozen=True)
class CouplingFunctions:
    """Scalar functions entering the nonlocal coupling at one Fourier mode.

    g0 drives the forward linearization, g the game's value-function
    equation, s the first-moment pairing. gprime is G'(xi) and may be
    overridden (e.g. set to zero) to study the decoupled operators.
    """

    xi: float
    s2: float
    phi_k: float
    gprime: float

    def sqrtF(self, u):
        return np.exp(-(np.asarray(u, dtype=float) - self.xi) ** 2 / (2.0 * self.s2)) / (np.pi * self.s2) ** 0.25

    def g0(self, u):
        u = np.asarray(u, dtype=float)
        return 2.0 * (u - self.xi) / self.s2 * self.sqrtF(u) * self.gprime * self.phi_k

    def g(self, u):
        u = np.asarray(u, dtype=float)
        return 2.0 * (self.xi - u) * self.sqrtF(u) * self.gprime * self.phi_k

    def s(self, u):
        u = np.asarray(u, dtype=float)
        return u * self.sqrtF(u)


def make_coupling(cfg: ModelConfig, eq: Equilibrium, k: int,
                  gprime: float | None = None) -> CouplingFunctions:
    """Coupling functions for mode k around the given equilibrium.

    Note forward g0 carries 1/sigma^2 through s2 = sigma^2; the game's g
    uses the wider stationary Gaussian through eq.s2.
    """
    gp = G_prime(eq.xi, cfg.h) if gprime is None else gprime
    return CouplingFunctions(xi=eq.xi, s2=eq.s2, phi_k=kernel_fourier(k, cfg.l), gprime=gp)
