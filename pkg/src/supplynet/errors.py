"""Exception types raised by the library."""


class SupplyNetError(Exception):
    """Base class for all library errors."""


class IndexOutOfRange(SupplyNetError, IndexError):
    pass


class DuplicateLink(SupplyNetError, ValueError):
    pass


class MissingLink(SupplyNetError, KeyError):
    pass


class InsufficientRetailers(SupplyNetError):
    """Raised when the construction needs more retailers than the game has."""

    def __init__(self, required: int, available: int):
        self.required = required
        self.available = available
        super().__init__(
            f"equilibrium needs at least n={required} retailers, game has n={available}"
        )


class InsufficientSuppliers(SupplyNetError):
    def __init__(self, required: int, available: int):
        self.required = required
        self.available = available
        super().__init__(
            f"price competition needs at least m={required} suppliers, game has m={available}"
        )


class SizeLimit(SupplyNetError):
    """Raised when an exhaustive enumeration would be too large."""


class BoundaryOptimum(SupplyNetError):
    """Raised when the planner optimum hits the n or m boundary."""


class ShapeMismatch(SupplyNetError, ValueError):
    """Raised when parameters do not have the structure an operation needs."""


class InfeasibleMoments(SupplyNetError, ValueError):
    """Raised when no distribution on [0, s_max] has the requested moments."""
