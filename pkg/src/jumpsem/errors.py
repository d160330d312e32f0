"""Exception types shared across the package."""


class JumpsemError(Exception):
    """Base class for all package-specific errors."""


class NotPositiveDefinite(JumpsemError):
    """A matrix that must be positive definite has a non-positive Cholesky pivot.

    Raised for degenerate implied covariances probed during optimization;
    callers treat the point as infeasible rather than aborting.
    """


class SingularPsi(JumpsemError):
    """The structural matrix psi = I - B0 is numerically singular."""


class NoFeasibleStart(JumpsemError):
    """The initial parameter value yields no positive definite covariance."""


class RankDeficient(JumpsemError):
    """The covariance-structure Jacobian lacks full column rank."""


class DfNonPositive(JumpsemError):
    """Model is untestable: free parameter count >= distinct covariance entries."""


class ConfigError(JumpsemError):
    """Invalid configuration document or model specification."""


class DataFormatError(JumpsemError):
    """Malformed observation or result file."""
