"""Exception types shared across the package."""


class CzirokMFGError(Exception):
    """Base class for numerical and validation failures."""


class QuadratureError(CzirokMFGError):
    """Raised when the node-doubling consistency check of a quadrature fails."""


class OverflowSignal(CzirokMFGError):
    """Raised when a Gaussian prefactor exceeds the representable range."""


class PoleError(CzirokMFGError):
    """Raised when a characteristic function is evaluated too close to a pole."""


class BracketError(CzirokMFGError):
    """Raised when a bisection bracket does not straddle the sought transition."""


class OnAxisEigenvalueError(CzirokMFGError):
    """Raised when imaginary-axis eigenvalues make the Riccati route inapplicable."""


class IllConditionedError(CzirokMFGError):
    """Raised when a required matrix inverse is numerically unreliable."""


class BlowUpError(CzirokMFGError):
    """Raised when a time integration exceeds the blow-up guard."""


class NonConvergenceError(CzirokMFGError):
    """Raised when a fixed-point iteration fails to reach tolerance.

    Carries the residual history so callers can report it.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []
