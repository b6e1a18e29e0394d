"""Exception hierarchy shared across the package."""


class VolHarvestError(Exception):
    """Base class for all package errors."""


class ParameterError(VolHarvestError, ValueError):
    """An input violates a documented invariant."""


class InfeasibleCorrelationError(ParameterError):
    """The requested correlation cannot be realised by two Bernoulli(p) drivers."""


class DegenerateMarketError(ParameterError):
    """The market has no unique growth-optimal mix (zero curvature)."""


class SingularCovarianceError(ParameterError):
    """Covariance matrix is not positive definite."""


class EmptyEnsembleError(VolHarvestError):
    """Every simulated path was ruined, or no paths were requested."""


class DataError(VolHarvestError, ValueError):
    """Malformed or insufficient market data."""


class RuinError(VolHarvestError):
    """A portfolio gross return was non-positive during a backtest."""

    def __init__(self, message, date=None):
        super().__init__(message)
        self.date = date
