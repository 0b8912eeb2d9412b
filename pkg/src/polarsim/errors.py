"""Exception types shared across the package."""


class PolarsimError(Exception):
    """Base class for all polarsim errors."""


class InvalidParameter(PolarsimError):
    """A model parameter violates a sign or range constraint."""


class AssumptionViolated(InvalidParameter):
    """The feedback/dissociation ordering k_fb > k_off > 0 fails.

    Without it the membrane is nearly empty at equilibrium and none of the
    stationary predictions apply.
    """


class InvalidGeometry(InvalidParameter):
    """Degenerate sphere (radius <= 0)."""


class Subcritical(PolarsimError):
    """k_fb*(1-eps) <= k_off: the growth bound does not apply."""


class Stuck(PolarsimError):
    """Total event rate is zero; no event can ever fire."""


class EmptyPointSet(PolarsimError):
    """Hemisphere search requires at least one point."""


class EmptyMembrane(PolarsimError):
    """Operation requires at least one membrane molecule."""


class InsufficientData(PolarsimError):
    """Too few snapshots for the requested statistic."""


class AutoBurnInUnavailable(PolarsimError):
    """burn_in = auto needs a positive relaxation rate (k_on > 0)."""


class ConfigError(PolarsimError):
    """Malformed run configuration.

    Carries the 1-based line number when the problem is tied to a line.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
