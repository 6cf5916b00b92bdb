"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An operation received arguments violating its contract."""


class EstimationFailedError(RuntimeError):
    """A model estimation (e.g. homography) could not produce a result."""
