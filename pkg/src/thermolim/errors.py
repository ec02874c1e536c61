"""Exception types shared across the package."""


class UsageError(ValueError):
    """Invalid arguments or violated preconditions."""


class ResourceError(RuntimeError):
    """A construction ran out of input (sequence exhausted, window too small)."""


class PivotBreakdown(ArithmeticError):
    """Symmetric factorization hit a (numerically) zero pivot."""

    def __init__(self, energy: float, shift: float):
        self.energy = energy
        self.shift = shift
        super().__init__(
            f"pivot breakdown at E={energy!r}; E is numerically an eigenvalue. "
            f"Retry with E shifted by +/-{shift:.3g}"
        )


class PartialTilingError(RuntimeError):
    """Greedy tiling could not reach its coverage targets."""

    def __init__(self, message: str, densities):
        self.densities = densities
        super().__init__(message)
