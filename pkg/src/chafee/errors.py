"""Exception types shared across the package."""


class ChafeeError(Exception):
    """Base class for all package errors."""


class TruncationError(ChafeeError, ValueError):
    """Requested more modes than a grid can resolve."""


class NoBranch(ChafeeError):
    """No nontrivial equilibrium on the requested branch at this lambda."""


class BracketFailure(ChafeeError):
    """Slope sweep found no sign change for the requested branch."""


class IntegrationBlowup(ChafeeError):
    """Shooting trajectory left the physically relevant region |u| <= 10."""


class NoConvergence(ChafeeError):
    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class InvasiveControl(ChafeeError):
    """The control term does not vanish on the equilibrium being analysed."""

    def __init__(self, message, control_norm=None):
        super().__init__(message)
        self.control_norm = control_norm


class Blowup(ChafeeError):
    def __init__(self, t):
        super().__init__(f"solution blew up at t={t:g}")
        self.t = t


class DegenerateWindow(ChafeeError, ValueError):
    """Fewer than four usable samples in a rate-fitting window."""


class CompositionError(ChafeeError, ValueError):
    """Morphisms are not composable (target of the first != source of the second)."""
