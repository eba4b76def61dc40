"""Exception hierarchy shared by every module.

Configuration/regime problems derive from :class:`ValueError`; numerical breakdowns
derive from :class:`ArithmeticError`. The CLI maps the first family to exit code 2
and the second to exit code 3.
"""


class ConfigError(ValueError):
    """Invalid user input (config file, CLI flag, volatility spec string)."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class RegimeError(ValueError):
    """The Hurst parameter lies outside the range an operation supports."""


class IdentityOperatorRegime(RegimeError):
    """H = 1/2: the fractional operator reduces to the identity, no constant exists."""


class NumericalError(ArithmeticError):
    """A numerical routine failed. ``module`` names where it happened."""

    def __init__(self, message, module=None):
        self.module = module
        if module is not None:
            message = f"{module}: {message}"
        super().__init__(message)


class FactorizationError(NumericalError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, pivot, size, module="fgn_engine"):
        self.pivot = pivot
        self.size = size
        super().__init__(
            f"Cholesky factorization of a {size}x{size} covariance failed: "
            f"leading minor of order {pivot} is not positive definite",
            module=module,
        )
