"""Exception hierarchy shared across the package."""


class FeederSimError(Exception):
    """Base class for all feedersim errors."""


class IncompatibleGridError(FeederSimError):
    """Two time series do not share the same time grid."""


class DataError(FeederSimError):
    """Bad input data: missing files, malformed rows, invalid configuration."""


class PlanningError(FeederSimError):
    """A device planner received an infeasible problem or failed to converge."""
