"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """Input outside the documented domain of an operation."""


class NotCompletelyPositiveError(ValueError):
    """A linear map was required to be completely positive but is not."""
