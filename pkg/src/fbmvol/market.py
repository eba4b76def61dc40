"""Exact simulation of the geometric fractional price process.

    S_t = S_0 exp( int_0^t sigma_s dB^H_s + mu t - theta(t) / 2 ),

with theta(t) the variance of the stochastic integral. For constant volatility
theta(t) = sigma^2 t^{2H} and the integral is sigma * B^H_t. For a time-varying
volatility the vector of cell integrals eta_k = int_{t_k}^{t_{k+1}} sigma dB^H is
drawn exactly from its Gram matrix, so there is no Riemann-sum discretization
error in the paths.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass, field

import numpy as np

from .calculus import DEFAULT_RESOLUTION, cell_gram, theta_report
from .errors import ConfigError
from .fgn import (
    HurstParameter,
    UniformGrid,
    canonical_increments,
    cholesky_lower,
    make_rng,
    sample_fgn,
    sample_fgn_batch,
)
from .volatility import Constant

__all__ = [
    "PricePath",
    "EtaVector",
    "simulate_const",
    "simulate_const_log_increments",
    "eta_covariance",
    "sample_eta",
    "sample_eta_batch",
    "simulate_tv",
    "tv_exponent_increments",
    "read_price_csv",
]


@dataclass(frozen=True)
class PricePath:
    """Prices on a uniform grid.

    ``gaussian`` is the stochastic part of the log-price (sigma B^H or the
    cumulated eta), ``exponent`` the deterministic part (mu t - theta(t)/2). Both
    are ``None`` for paths read from a file.
    """

    times: np.ndarray
    prices: np.ndarray
    s0: float
    hurst: float | None = None
    vol: object = None
    drift: float = 0.0
    seed: int | None = None
    gaussian: np.ndarray | None = field(default=None, repr=False)
    exponent: np.ndarray | None = field(default=None, repr=False)
    log_prices: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.times.shape != self.prices.shape or self.times.ndim != 1:
            raise ValueError("times and prices must be 1-d arrays of equal length")
        if self.log_prices is None and np.any(self.prices <= 0):
            raise ValueError("prices must be strictly positive")

    @property
    def n(self) -> int:
        return self.times.size - 1

    def log(self) -> np.ndarray:
        """Log-prices; the stored ones when the path was simulated, else log(prices)."""
        if self.log_prices is not None:
            return self.log_prices
        if np.any(self.prices <= 0):
            raise ValueError("log-price undefined for non-positive prices")
        return np.log(self.prices)

    def implied_increments(self) -> np.ndarray:
        """Stochastic increments recovered from the Gaussian part of the log-price."""
        if self.gaussian is None:
            raise ValueError("path carries no Gaussian decomposition")
        return np.diff(self.gaussian)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "S"])
            for t, s in zip(self.times, self.prices):
                w.writerow([f"{t:.17g}", f"{s:.17g}"])


def read_price_csv(path) -> PricePath:
    """Read a two-column ``t,S`` CSV (header optional)."""
    times, prices = [], []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec:
                continue
            try:
                t, s = float(rec[0]), float(rec[1])
            except (ValueError, IndexError):
                if times:
                    raise ConfigError(f"bad row {rec!r} in {path}", "input")
                continue
            times.append(t)
            prices.append(s)
    if len(times) < 2:
        raise ConfigError(f"{path}: need at least two observations", "input")
    prices = np.asarray(prices)
    if np.any(prices <= 0):
        raise ConfigError(f"{path}: prices must be strictly positive", "input")
    return PricePath(np.asarray(times), prices, s0=float(prices[0]))


def _assemble(grid, s0, gaussian, exponent, **meta) -> PricePath:
    log_prices = np.log(s0) + exponent + gaussian
    prices = np.exp(log_prices)
    prices[0] = s0  # exp(log(s0)) need not round-trip
    return PricePath(grid.times(), prices, float(s0),
                     gaussian=gaussian, exponent=exponent, log_prices=log_prices, **meta)


def simulate_const(s0: float, sigma: float, H, grid: UniformGrid, seed: int,
                   mu: float = 0.0, index: int = 0, method: str = "cholesky") -> PricePath:
    """log S_t = log s0 + sigma B^H_t + mu t - sigma^2 t^{2H} / 2 on the grid."""
    if not s0 > 0:
        raise ValueError(f"s0 must be positive, got {s0!r}")
    if not sigma >= 0:
        raise ValueError(f"sigma must be non-negative, got {sigma!r}")
    H = HurstParameter(H)
    t = grid.times()
    eta = canonical_increments(sigma * sample_fgn(grid, H, seed, index, method).values)
    gaussian = np.concatenate([[0.0], np.cumsum(eta)])
    exponent = mu * t - 0.5 * sigma**2 * t ** (2.0 * H)
    return _assemble(grid, s0, gaussian, exponent, hurst=float(H), vol=Constant(sigma),
                     drift=float(mu), seed=int(seed))


def simulate_const_log_increments(sigma: float, H, grid: UniformGrid, seed: int,
                                  indices, *key: int, mu: float = 0.0,
                                  method: str = "cholesky") -> np.ndarray:
    """Log-return matrix (len(indices) x n) of :func:`simulate_const` paths, batched."""
    H = HurstParameter(H)
    t = grid.times()
    drift = np.diff(mu * t - 0.5 * sigma**2 * t ** (2.0 * H))
    dB = sample_fgn_batch(grid, H, seed, indices, *key, method=method)
    return sigma * dB + drift


def eta_covariance(vol, N: int, H, horizon: float = 1.0,
                   resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """Covariance of (eta_0, ..., eta_{N-1}); entry (k, j) is <f_k, f_j>_H."""
    return cell_gram(vol, N, H, horizon, resolution)


@dataclass(frozen=True)
class EtaVector:
    values: np.ndarray
    gram: np.ndarray = field(repr=False)
    seed: int
    index: int = 0


@functools.lru_cache(maxsize=16)
def _tv_model(vol, N, H, horizon, resolution):
    gram = cell_gram(vol, N, H, horizon, resolution)
    L = cholesky_lower(gram, module="market_model")
    L.setflags(write=False)
    rep = theta_report(vol, N, H, horizon, resolution)
    theta_path = rep.theta_path()
    theta_path.setflags(write=False)
    return gram, L, theta_path


def _tv(vol, grid, H, resolution):
    H = HurstParameter(H).require_long_memory()
    return _tv_model(vol, grid.n, float(H), grid.horizon, int(resolution))


def sample_eta(vol, H, grid: UniformGrid, seed: int, index: int = 0,
               resolution: int = DEFAULT_RESOLUTION) -> EtaVector:
    gram, L, _ = _tv(vol, grid, H, resolution)
    z = make_rng(seed, index).standard_normal(grid.n)
    return EtaVector(canonical_increments(L @ z), gram, int(seed), int(index))


def sample_eta_batch(vol, H, grid: UniformGrid, seed: int, indices, *key: int,
                     resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    _, L, _ = _tv(vol, grid, H, resolution)
    indices = list(indices)
    z = np.empty((len(indices), grid.n))
    for row, i in enumerate(indices):
        z[row] = make_rng(seed, i, *key).standard_normal(grid.n)
    return canonical_increments(z @ L.T)


def tv_exponent_increments(vol, H, grid: UniformGrid,
                           resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """Deterministic log-return part -delta_k / 2 for the time-varying model."""
    _, _, theta_path = _tv(vol, grid, H, resolution)
    return -0.5 * np.diff(theta_path)


def simulate_tv(s0: float, vol, H, grid: UniformGrid, seed: int, index: int = 0,
                resolution: int = DEFAULT_RESOLUTION) -> PricePath:
    """Driftless time-varying-volatility path from an exact draw of eta.

    log S_{t_m} = log s0 + sum_{k<m} eta_k - theta(t_m) / 2.
    """
    if not s0 > 0:
        raise ValueError(f"s0 must be positive, got {s0!r}")
    _, _, theta_path = _tv(vol, grid, H, resolution)
    eta = sample_eta(vol, H, grid, seed, index, resolution)
    gaussian = np.concatenate([[0.0], np.cumsum(eta.values)])
    exponent = -0.5 * np.asarray(theta_path)
    return _assemble(grid, s0, gaussian, exponent, hurst=float(H), vol=vol, drift=0.0,
                     seed=int(seed))
