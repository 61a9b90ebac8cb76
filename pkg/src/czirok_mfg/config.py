"""Model parameters and shared numerical tolerances."""

from __future__ import annotations

from dataclasses import dataclass, field

# Stability classification thresholds.
EPS_STAB = 1e-9          # max real part below -EPS_STAB counts as stable
COND_INIT_MAX = 1e10     # invertibility guard for the BVP initial-condition map
V11_COND_MAX = 1e10      # guard for the Schur-vector inverse in the Riccati solve
EPS_IM_RICCATI = 1e-8    # minimal axis distance required by the Riccati route


def eps_axis(spectral_radius: float) -> float:
    """Axis tolerance used to count imaginary-axis eigenvalues."""
    return 1e-6 * (1.0 + spectral_radius)


@dataclass(frozen=True)
class ModelConfig:
    """Physical and numerical parameters of the kinetic model.

    l       : length of the periodic spatial domain
    h       : interaction strength; ordered equilibria require h > 4
    sigma   : noise intensity
    r       : unit control cost (only meaningful for the game variant)
    P       : number of velocity eigenfunctions kept per Fourier mode
    K       : largest spatial Fourier mode analysed
    quad_nodes : Gauss-Hermite node count (default max(4P, 80))
    """

    l: float = 10.0
    h: float = 5.0
    sigma: float = 2.0
    r: float = 1.0
    P: int = 20
    K: int = 4
    quad_nodes: int = field(default=0)

    def __post_init__(self):
        if self.l <= 0:
            raise ValueError(f"domain length must be positive, got l={self.l}")
        if self.sigma <= 0:
            raise ValueError(f"noise intensity must be positive, got sigma={self.sigma}")
        if self.r <= 0:
            raise ValueError(f"unit control cost must be positive, got r={self.r}")
        if self.P < 2:
            raise ValueError(f"need at least two velocity modes, got P={self.P}")
        if self.K < 0:
            raise ValueError(f"max Fourier mode must be nonnegative, got K={self.K}")
        if self.quad_nodes == 0:
            object.__setattr__(self, "quad_nodes", max(4 * self.P, 80))
        if self.quad_nodes < 2 * self.P:
            raise ValueError(
                f"quad_nodes={self.quad_nodes} too small for P={self.P}; need at least {2 * self.P}"
            )
        if self.quad_nodes > 350:
            raise ValueError(
                "quad_nodes > 350 would overflow the reweighted Gauss-Hermite rule in float64"
            )

    def with_(self, **kw) -> "ModelConfig":
        """Copy with selected fields replaced."""
        cur = dict(l=self.l, h=self.h, sigma=self.sigma, r=self.r,
                   P=self.P, K=self.K, quad_nodes=0)
        cur.update(kw)
        return ModelConfig(**cur)
