"""Exception types shared across the package."""


class FairClusterError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FairClusterError, ValueError):
    """Invalid parameters or inputs."""


class DatasetError(ConfigurationError):
    """Malformed dataset or ingestion failure."""


class UnsupportedConfiguration(ConfigurationError):
    """A valid configuration that the chosen algorithm cannot handle."""


class InfeasibleTarget(FairClusterError):
    """No assignment satisfies the fairness targets and non-emptiness.

    ``diagnostics`` carries whatever context the raiser had at hand
    (targets, group counts, feasible balances, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


# the assignment solvers raise the same type; the alias reads better there
Infeasible = InfeasibleTarget


class TimeCapNoIncumbent(FairClusterError):
    """The solve time cap expired before any feasible assignment was found."""


class FirstStageDegenerate(FairClusterError):
    """The first flow stage could not give every center an object."""
