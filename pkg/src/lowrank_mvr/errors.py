"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class RankDeficiencyError(NumericError):
    """A matrix has numerical rank below the requested rank."""


class CapacityError(ValueError):
    """A dense computation would exceed the configured size guard."""
