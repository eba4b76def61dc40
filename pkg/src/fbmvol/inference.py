"""Quadratic-variation volatility estimator, its asymptotic variances and intervals."""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtri

from .calculus import DEFAULT_RESOLUTION, cell_gram
from .errors import RegimeError
from .fgn import HurstParameter, fgn_autocovariance, fgn_covariance_matrix

__all__ = [
    "EstimateReport",
    "qv_estimate",
    "qv_from_log_increments",
    "asymptotic_variance_const",
    "asymptotic_variance_tail_bound",
    "printed_asymptotic_variance_const",
    "asymptotic_variance_tv",
    "expected_qv_const",
    "cross_term_second_moment",
    "cross_term_bound",
    "square_term",
    "square_term_bound",
    "normalized_statistic",
    "confidence_interval",
    "estimate_report",
    "DEFAULT_TRUNCATION",
]

DEFAULT_TRUNCATION = 10**6


def _uniform_step(times: np.ndarray) -> float:
    dt = np.diff(np.asarray(times, dtype=float))
    if dt.size < 1:
        raise ValueError("need at least two observations")
    step = (times[-1] - times[0]) / dt.size
    if not step > 0 or np.max(np.abs(dt - step)) > 1e-9 * step:
        raise ValueError("observations must lie on a uniform, increasing time grid")
    return float(step)


def qv_from_log_increments(log_returns, H, step: float) -> np.ndarray:
    """(1 / (N h^{2H})) * sum (log-return)^2 along the last axis."""
    x = np.asarray(log_returns, dtype=float)
    N = x.shape[-1]
    return np.sum(x * x, axis=-1) / (N * step ** (2.0 * float(H)))


def qv_estimate(path, H) -> float:
    """Normalized realized quadratic variation of the log-price path."""
    H = HurstParameter(H)
    if path.times.size < 2:
        raise ValueError("need at least two observations")
    step = _uniform_step(path.times)
    return float(qv_from_log_increments(np.diff(path.log()), H, step))


@functools.lru_cache(maxsize=64)
def _series(H: float, K: int) -> float:
    r = fgn_autocovariance(np.arange(1, K + 1), H)
    return float(np.sum(r * r))


def asymptotic_variance_const(sigma2: float, H, truncation: int = DEFAULT_TRUNCATION) -> float:
    """2 sigma^4 (1 + 2 sum_{k=1}^K rho(k)^2), rho the unit-step fGn autocovariance.

    Limit variance of sqrt(N) (sigma2_hat - sigma2) under constant volatility, H < 3/4.
    """
    H = HurstParameter(H).require_clt()
    if truncation < 1:
        raise ValueError("truncation must be at least 1")
    return 2.0 * sigma2**2 * (1.0 + 2.0 * _series(float(H), int(truncation)))


def asymptotic_variance_tail_bound(sigma2: float, H, truncation: int = DEFAULT_TRUNCATION) -> float:
    """Upper bound on the omitted series tail 4 sigma^4 sum_{k>K} rho(k)^2.

    Uses |rho(k)| <= H |2H-1| (k-1)^{2H-2} and an integral comparison, K >= 2.
    """
    H = float(HurstParameter(H).require_clt())
    K = int(truncation)
    if K < 2:
        raise ValueError("tail bound needs truncation >= 2")
    c = (H * abs(2 * H - 1)) ** 2
    return 4.0 * sigma2**2 * c * (K - 1) ** (4 * H - 3) / (3 - 4 * H)


def printed_asymptotic_variance_const(sigma2: float, H, N: int = 10**6) -> float:
    """The constant-volatility limit variance exactly in its as-printed form.

    2 sigma^4 (1 + 2 (1 - 1/N)(2^{2H} - 1)^2 + sum_{k=2}^N (1 - k/N)
    [(k+1)^{2H} + (k-1)^{2H} - 2 k^{2H}]^2), evaluated at a finite N. It does not
    reduce to 2 sigma^4 at H = 1/2 and is kept only for reporting next to
    :func:`asymptotic_variance_const`.
    """
    H = float(HurstParameter(H))
    k = np.arange(2, N + 1)
    full = 2.0 * fgn_autocovariance(k, H)  # bracket without the 1/2
    s = 1.0 + 2.0 * (1 - 1 / N) * (2 ** (2 * H) - 1) ** 2 + np.sum((1 - k / N) * full**2)
    return 2.0 * sigma2**2 * float(s)


def asymptotic_variance_tv(vol, N: int, H, horizon: float = 1.0,
                           resolution: int = DEFAULT_RESOLUTION) -> float:
    """S_N = 2 N h^{2-4H} sum_{k,k'} <f_k, f_k'>_H^2 (N^{4H-1} 2 sum ... when horizon = 1).

    This is the exact variance of X_N = sqrt(N) (h^{1-2H} sum eta_k^2 - tilde_theta).
    """
    H = HurstParameter(H)
    if not 0.5 < H < 0.75:
        raise RegimeError(f"H={float(H)}: time-varying CLT needs 1/2 < H < 3/4")
    G = cell_gram(vol, N, H, horizon, resolution)
    h = horizon / N
    return float(2.0 * N * h ** (2.0 - 4.0 * H) * np.sum(G * G))


def expected_qv_const(sigma2: float, H, N: int) -> float:
    """Exact finite-N mean of the estimator for constant volatility, no drift, T = 1.

    sigma2 + (sigma2^2 / 4) N^{2H-1} sum_k ((t_{k+1})^{2H} - (t_k)^{2H})^2.
    """
    H = float(HurstParameter(H))
    t = np.arange(N + 1) / N
    d = np.diff(t ** (2 * H))
    return sigma2 + 0.25 * sigma2**2 * N ** (2 * H - 1) * float(np.sum(d * d))


def cross_term_second_moment(sigma2: float, H, N: int) -> float:
    """Exact E[U_1^2] of the drift-correction cross term (constant volatility, T = 1).

    U_1 = sigma^3 N^{2H - 1/2} sum_k dB_k d_k with d_k = t_{k+1}^{2H} - t_k^{2H}.
    """
    H = float(HurstParameter(H))
    t = np.arange(N + 1) / N
    d = np.diff(t ** (2 * H))
    C = fgn_covariance_matrix(N, H, 1.0 / N)
    return sigma2**3 * N ** (4 * H - 1) * float(d @ C @ d)


def cross_term_bound(sigma2: float, H, N: int) -> float:
    """12 sigma^6 H^2 N^{2H-2} + 16 sigma^6 H^3 (2H-1) N^{4H-3}."""
    H = float(H)
    s6 = sigma2**3
    return 12 * s6 * H**2 * N ** (2 * H - 2) + 16 * s6 * H**3 * (2 * H - 1) * N ** (4 * H - 3)


def square_term(sigma2: float, H, N: int) -> float:
    """U_2 = (sigma^4 / 4) N^{2H - 1/2} sum_k (t_{k+1}^{2H} - t_k^{2H})^2."""
    H = float(HurstParameter(H))
    t = np.arange(N + 1) / N
    d = np.diff(t ** (2 * H))
    return 0.25 * sigma2**2 * N ** (2 * H - 0.5) * float(np.sum(d * d))


def square_term_bound(sigma2: float, H, N: int) -> float:
    H = float(H)
    return sigma2**2 * H**2 * N ** (2 * H - 1.5)


def normalized_statistic(estimate, target, variance, N):
    """sqrt(N) (estimate - target) / sqrt(variance); vectorized over estimates."""
    variance = np.asarray(variance, dtype=float)
    if np.any(~(variance > 0)):
        raise ValueError(f"variance must be positive, got {variance!r}")
    out = math.sqrt(N) * (np.asarray(estimate, dtype=float) - target) / np.sqrt(variance)
    return float(out) if out.ndim == 0 else out


def _z(level: float) -> float:
    if not 0 < level < 1:
        raise ValueError(f"confidence level must lie in (0, 1), got {level!r}")
    return float(ndtri(0.5 * (1.0 + level)))


def confidence_interval(estimate: float, variance: float, N: int, level: float = 0.95):
    """estimate +/- z_{(1+level)/2} sqrt(variance / N)."""
    if not variance >= 0:
        raise ValueError(f"variance must be non-negative, got {variance!r}")
    half = _z(level) * math.sqrt(variance / N)
    return estimate - half, estimate + half


@dataclass(frozen=True)
class EstimateReport:
    sigma2_hat: float
    target: float | None
    asymptotic_variance: float
    n: int
    ci_low: float
    ci_high: float
    level: float
    hurst: float
    printed_asymptotic_variance: float | None = None
    series_tail_bound: float | None = None
    flags: tuple = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flags"] = list(self.flags)
        return d


def estimate_report(path, H, level: float = 0.95, target: float | None = None,
                    truncation: int = DEFAULT_TRUNCATION) -> EstimateReport:
    """Point estimate with a plug-in CLT interval (sigma2_hat inside the variance)."""
    H = HurstParameter(H).require_clt()
    est = qv_estimate(path, H)
    N = path.times.size - 1
    var = asymptotic_variance_const(est, H, truncation)
    flags = []
    if est == 0.0:
        flags.append("zero estimate: plug-in variance degenerates to 0")
    lo, hi = confidence_interval(est, var, N, level)
    return EstimateReport(
        sigma2_hat=est,
        target=target,
        asymptotic_variance=var,
        n=N,
        ci_low=lo,
        ci_high=hi,
        level=level,
        hurst=float(H),
        printed_asymptotic_variance=printed_asymptotic_variance_const(est, H, 10**5),
        series_tail_bound=asymptotic_variance_tail_bound(est, H, truncation),
        flags=tuple(flags),
    )
