"""Exception hierarchy.

Every failure mode a caller may want to branch on has its own class; all of
them derive from :class:`WalkerError` so a CLI can catch the family at once.
"""


class WalkerError(Exception):
    """Base class for all package errors."""


class SingularMomentumMap(WalkerError):
    """Disc velocity cannot be recovered from the stance-foot momentum."""


class SingularImpact(WalkerError):
    """Contact constraint block is rank deficient (legs superposed)."""


class NotOnGuard(WalkerError):
    """State is not on the impact surface (height or approach speed)."""


class PenetrationImpact(WalkerError):
    """Post-impact swing foot would keep moving into the ground."""


class OutOfRange(WalkerError):
    """Stance angle outside the gait domain plus margin."""


class InfeasibleBoundary(WalkerError):
    """Step boundary data cannot satisfy the impact-invariance equations."""


class QuadratureFailure(WalkerError):
    """Adaptive quadrature did not reach the requested tolerance."""


class NoPeriodicGait(WalkerError):
    """No speed scale makes the momentum profile periodic."""


class SingularDecoupling(WalkerError):
    """Decoupling matrix too ill-conditioned for exact linearization."""


class SpeedReversal(WalkerError):
    """Stance angle stopped increasing during a step."""


class IntegratorFailure(WalkerError):
    """ODE integrator reported failure."""


class FellOver(WalkerError):
    """Stance leg left the upright half plane."""


class StallTimeout(WalkerError):
    """A step exceeded the configured maximum duration."""


class NoReturn(WalkerError):
    """No second impact followed within the return-map horizon."""


class OutOfBounds(WalkerError):
    """Parameter perturbation factor outside the accepted range."""


class DegenerateGains(WalkerError):
    """Repeated inner-loop characteristic roots."""
