"""Equilibria of a two-stage supply-chain formation game with yield uncertainty."""

from .errors import (
    BoundaryOptimum,
    DuplicateLink,
    IndexOutOfRange,
    InfeasibleMoments,
    InsufficientRetailers,
    InsufficientSuppliers,
    MissingLink,
    ShapeMismatch,
    SizeLimit,
    SupplyNetError,
)
from .model import (
    GameParams,
    Network,
    PriceVector,
    SupplyRealization,
    ValidationReport,
    add_link,
    build_network,
    remove_link,
    validate_params,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryOptimum",
    "DuplicateLink",
    "GameParams",
    "IndexOutOfRange",
    "InfeasibleMoments",
    "InsufficientRetailers",
    "InsufficientSuppliers",
    "MissingLink",
    "Network",
    "PriceVector",
    "ShapeMismatch",
    "SizeLimit",
    "SupplyNetError",
    "SupplyRealization",
    "ValidationReport",
    "add_link",
    "build_network",
    "remove_link",
    "validate_params",
]
