"""European call prices in the fractional market.

Both closed forms reduce to a Black-Scholes-type expression in the *total
variance* v of the log-price between t and T:

    d1 = (ln(S/K) + R + v/2) / sqrt(v),   d2 = d1 - sqrt(v),
    C  = S Phi(d1) - K exp(-R) Phi(d2),

with R the integrated short rate over [t, T]. Constant volatility gives
v = sigma^2 (T^{2H} - t^{2H}); a deterministic sigma(.) gives v = theta(T) - theta(t).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .calculus import DEFAULT_RESOLUTION, theta_total
from .fgn import HurstParameter

__all__ = [
    "OptionQuote",
    "PriceInterval",
    "norm_cdf",
    "black_scholes_call",
    "call_from_total_variance",
    "call_price_const",
    "call_price_tv",
    "call_price_tv_const_rate",
    "price_interval",
    "total_variance_const",
]


def norm_cdf(x: float) -> float:
    """Standard normal CDF through erfc (no cancellation in the lower tail)."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class OptionQuote:
    price: float
    d1: float
    d2: float
    spot: float
    strike: float
    rate_integral: float
    total_variance: float
    hurst: float | None = None
    t: float | None = None
    maturity: float | None = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("d1", "d2"):
            if math.isinf(d[key]):
                d[key] = "inf" if d[key] > 0 else "-inf"
        return d


def _check_spot_strike(S, K):
    if not S > 0:
        raise ValueError(f"spot must be positive, got {S!r}")
    if not K > 0:
        raise ValueError(f"strike must be positive, got {K!r}")


def call_from_total_variance(S: float, K: float, rate_integral: float, v: float,
                             **echo) -> OptionQuote:
    """Call price for total log-variance ``v`` and integrated rate ``rate_integral``.

    For v <= 0 the discounted intrinsic value is returned and d1 = d2 = +/-inf.
    """
    _check_spot_strike(S, K)
    discount = math.exp(-rate_integral)
    m = math.log(S / K) + rate_integral
    if not v > 0:
        intrinsic = max(S - K * discount, 0.0)
        d = math.copysign(math.inf, m) if m != 0 else 0.0
        return OptionQuote(intrinsic, d, d, S, K, rate_integral, max(v, 0.0),
                           degenerate=True, **echo)
    sv = math.sqrt(v)
    d1 = (m + 0.5 * v) / sv
    d2 = d1 - sv
    price = S * norm_cdf(d1) - K * discount * norm_cdf(d2)
    return OptionQuote(price, d1, d2, S, K, rate_integral, v, **echo)


def black_scholes_call(S, K, r, sigma, tau) -> float:
    """Classical Black-Scholes call with time to maturity ``tau``."""
    _check_spot_strike(S, K)
    sv = sigma * math.sqrt(tau)
    d1 = (math.log(S / K) + (r + 0.5 * sigma**2) * tau) / sv
    d2 = d1 - sv
    return S * norm_cdf(d1) - K * math.exp(-r * tau) * norm_cdf(d2)


def _check_times(t, T):
    if not 0 <= t <= T:
        raise ValueError(f"need 0 <= t <= T, got t={t!r}, T={T!r}")


def total_variance_const(sigma2: float, H, t: float, T: float) -> float:
    """sigma^2 (T^{2H} - t^{2H})."""
    H = float(HurstParameter(H))
    return sigma2 * (T ** (2 * H) - t ** (2 * H))


def call_price_const(S, K, r, sigma, H, t, T) -> OptionQuote:
    """Call price under constant rate and volatility (fractional Black-Scholes)."""
    _check_times(t, T)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    H = HurstParameter(H)
    v = total_variance_const(sigma * sigma, H, t, T)
    return call_from_total_variance(S, K, r * (T - t), v, hurst=float(H), t=t, maturity=T)


def call_price_tv(S, K, rate_integral, vol, H, t, T,
                  resolution: int = DEFAULT_RESOLUTION) -> OptionQuote:
    """Call price under deterministic sigma(.), v = theta(T) - theta(t), H > 1/2.

    ``rate_integral`` is int_t^T r_s ds.
    """
    _check_times(t, T)
    H = HurstParameter(H).require_long_memory()
    v = theta_total(vol, T, H, resolution) - theta_total(vol, t, H, resolution)
    return call_from_total_variance(S, K, rate_integral, v, hurst=float(H), t=t, maturity=T)


def call_price_tv_const_rate(S, K, r, vol, H, t, T,
                             resolution: int = DEFAULT_RESOLUTION) -> OptionQuote:
    return call_price_tv(S, K, r * (T - t), vol, H, t, T, resolution)


@dataclass(frozen=True)
class PriceInterval:
    low: float
    high: float
    clipped: bool = False

    def __iter__(self):
        return iter((self.low, self.high))


def price_interval(S, K, rate_integral, v_lo, v_hi) -> PriceInterval:
    """Map an interval of total variance to an interval of call prices.

    The call price is non-decreasing in v, so the endpoints map to endpoints. A
    negative lower end (e.g. from a wide CI) is clipped to 0 and flagged.
    """
    if v_lo > v_hi:
        raise ValueError(f"need v_lo <= v_hi, got ({v_lo}, {v_hi})")
    clipped = False
    if v_lo < 0:
        v_lo, clipped = 0.0, True
        v_hi = max(v_hi, 0.0)
    lo = call_from_total_variance(S, K, rate_integral, v_lo).price
    hi = call_from_total_variance(S, K, rate_integral, v_hi).price
    return PriceInterval(lo, hi, clipped)
