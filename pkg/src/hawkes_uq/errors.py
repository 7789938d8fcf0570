"""Exception hierarchy."""


class HawkesError(Exception):
    """Base class for all package errors."""


class ExplosiveProcess(HawkesError):
    """Branching matrix has spectral radius >= 1; simulation would not terminate."""


class NonStationary(HawkesError):
    """Stationary closed forms requested for a process with spectral radius >= 1."""


class RateBoundViolation(HawkesError):
    """The thinning majorant fell below the true total intensity."""


class NonFinite(HawkesError):
    """A likelihood evaluation produced a non-finite value."""


class SingularFisher(HawkesError):
    """The Fisher information estimate is not positive definite."""


class Infeasible(HawkesError):
    """A linear program has an empty feasible region."""


class KernelUnsupported(HawkesError):
    """An operation was called with a kernel family it does not handle."""


class ConfigError(HawkesError):
    """Malformed experiment configuration or input file."""
