"""Exception types shared across the package."""


class CapExceededError(RuntimeError):
    """A size/depth parameter exceeds the documented cap for an operation."""


class DuplicateCoordinateError(ValueError):
    """Input points violate general position (repeated x or y coordinate)."""


class AxisMismatchError(ValueError):
    """A 2-d tree cost flavor was requested with the wrong root split axis."""


class GridTooCoarseError(ValueError):
    """A grid operation was given fewer points than its accuracy contract needs."""
