"""Exception types raised across the package."""


class EwmaskError(Exception):
    """Base class for package errors."""


class InputError(EwmaskError, ValueError):
    """Malformed or out-of-contract input data."""


class EstimationError(EwmaskError):
    """Likelihood maximization failed or the data cannot support a fit.

    ``best_point`` holds the best natural-parameter values reached (a dict, or
    None when estimation never started) and ``diagnostic`` a short reason.
    """

    def __init__(self, message, best_point=None, diagnostic=None):
        super().__init__(message)
        self.best_point = best_point
        self.diagnostic = diagnostic or message


class MissingArtifactError(EwmaskError):
    """A file produced by an earlier pipeline stage is absent."""

    def __init__(self, path):
        super().__init__(f"missing prerequisite artifact: {path}")
        self.path = path
