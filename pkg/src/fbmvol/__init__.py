"""Fractional Brownian motion market toolkit.

fGn/fBm sampling, deterministic-integrand fractional calculus, geometric
fractional price paths, quadratic-variation volatility inference, option pricing
and a reproducible experiment harness.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    FactorizationError,
    IdentityOperatorRegime,
    NumericalError,
    RegimeError,
)
from .fgn import HurstParameter, UniformGrid, sample_fgn, cumulate  # noqa: E402
from .volatility import Constant, PowerLaw, PowerSum, Tabulated, parse_vol  # noqa: E402
from .calculus import theta_total, tilde_theta, theta_report  # noqa: E402
from .market import simulate_const, simulate_tv, read_price_csv  # noqa: E402
from .inference import qv_estimate, asymptotic_variance_const, estimate_report  # noqa: E402
from .pricing import call_price_const, call_price_tv  # noqa: E402

__all__ = [
    "ConfigError", "FactorizationError", "IdentityOperatorRegime", "NumericalError",
    "RegimeError", "HurstParameter", "UniformGrid", "sample_fgn", "cumulate",
    "Constant", "PowerLaw", "PowerSum", "Tabulated", "parse_vol",
    "theta_total", "tilde_theta", "theta_report",
    "simulate_const", "simulate_tv", "read_price_csv",
    "qv_estimate", "asymptotic_variance_const", "estimate_report",
    "call_price_const", "call_price_tv",
]
