"""Exact sampling of fractional Gaussian noise and fractional Brownian motion.

Two exact samplers are provided for the increments of B^H on a uniform grid:

* :func:`sample_fgn_cholesky` factors the n x n Toeplitz covariance once (cached)
  and multiplies by a standard normal vector.
* :func:`sample_fgn_circulant` embeds the covariance in a 2n circulant matrix and
  draws through the FFT (Davies-Harte), O(n log n).

Every draw is keyed by ``(seed, index)`` through :class:`numpy.random.SeedSequence`
so replications are reproducible, independent streams regardless of how they are
scheduled.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack, toeplitz

from .errors import FactorizationError, RegimeError

__all__ = [
    "HurstParameter",
    "UniformGrid",
    "FgnIncrements",
    "FbmPath",
    "make_rng",
    "fbm_covariance",
    "fgn_autocovariance",
    "increment_autocorrelation",
    "fgn_covariance_matrix",
    "cholesky_factor",
    "circulant_eigenvalues",
    "sample_fgn_cholesky",
    "sample_fgn_circulant",
    "sample_fgn",
    "sample_fgn_batch",
    "cumulate",
    "canonical_increments",
]

#: relative floor below which a negative circulant eigenvalue triggers the Cholesky fallback
EIGENVALUE_FLOOR = 1e-10


class HurstParameter(float):
    """A float constrained to the open interval (0, 1)."""

    def __new__(cls, value):
        v = float(value)
        if not (0.0 < v < 1.0) or np.isnan(v):
            raise RegimeError(f"Hurst parameter must lie in (0, 1), got {value!r}")
        return super().__new__(cls, v)

    @property
    def value(self) -> float:
        return float(self)

    def require_clt(self) -> "HurstParameter":
        if self >= 0.75:
            raise RegimeError(
                f"H={float(self)} is outside the CLT range H < 3/4 for quadratic variations"
            )
        return self

    def require_long_memory(self) -> "HurstParameter":
        if self <= 0.5:
            raise RegimeError(
                f"H={float(self)} is not supported here: the time-varying volatility "
                "results need H > 1/2"
            )
        return self

    def __repr__(self):
        return f"HurstParameter({float(self)!r})"


@dataclass(frozen=True)
class UniformGrid:
    """n equal steps covering [0, horizon]."""

    n: int
    horizon: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid needs a positive integer number of steps, got {self.n!r}")
        if not self.horizon > 0:
            raise ValueError(f"grid horizon must be positive, got {self.horizon!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def step(self) -> float:
        return self.horizon / self.n

    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.step


@dataclass(frozen=True)
class FgnIncrements:
    values: np.ndarray
    hurst: HurstParameter
    grid: UniformGrid
    seed: int
    index: int = 0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.values.shape != (self.grid.n,):
            raise ValueError(
                f"expected {self.grid.n} increments, got array of shape {self.values.shape}"
            )


@dataclass(frozen=True)
class FbmPath:
    values: np.ndarray
    hurst: HurstParameter
    grid: UniformGrid
    seed: int
    index: int = 0

    def increments(self) -> np.ndarray:
        return np.diff(self.values)


def make_rng(seed: int, index: int = 0, *key: int) -> np.random.Generator:
    """Independent generator for replication ``index`` of experiment ``seed``.

    Extra integers in ``key`` further separate streams (e.g. one per table cell).
    """
    return np.random.default_rng(
        np.random.SeedSequence(int(seed), spawn_key=(*map(int, key), int(index)))
    )


def _check_time(t, name):
    if np.any(np.asarray(t) < 0):
        raise ValueError(f"{name} must be non-negative, got {t!r}")


def fbm_covariance(s, t, H) -> float:
    """E[B^H_s B^H_t] = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2 for s, t >= 0."""
    H = HurstParameter(H)
    _check_time(s, "s")
    _check_time(t, "t")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    a = 2.0 * H
    out = 0.5 * (t**a + s**a - np.abs(t - s) ** a)
    return float(out) if out.ndim == 0 else out


_SERIES_TERMS = 12
_SERIES_FROM = 8


def fgn_autocovariance(k, H) -> np.ndarray:
    """Autocovariance of unit-step fGn at integer lags ``k``.

    rho(k) = ((k+1)^{2H} + |k-1|^{2H} - 2 k^{2H}) / 2. For k >= 8 it is
    evaluated from the even binomial series of (1 +/- 1/k)^{2H}, which avoids the
    cancellation of the three-term form at large lags.
    """
    H = HurstParameter(H)
    a = 2.0 * float(H)
    k = np.abs(np.asarray(k, dtype=float))
    out = np.empty_like(k)

    small = k < _SERIES_FROM
    ks = k[small]
    out[small] = 0.5 * ((ks + 1.0) ** a + np.abs(ks - 1.0) ** a - 2.0 * ks**a)

    kl = k[~small]
    if kl.size:
        # b_j = binom(a, 2j); rho(k) = k^a * sum_j b_j k^{-2j}
        coef = []
        b = 1.0
        for n in range(1, 2 * _SERIES_TERMS + 1):
            b *= (a - n + 1) / n
            if n % 2 == 0:
                coef.append(b)
        y = 1.0 / (kl * kl)
        acc = np.zeros_like(kl)
        for c in reversed(coef):
            acc = (acc + c) * y
        out[~small] = kl**a * acc
    return out


def increment_autocorrelation(k, H, h=1.0):
    """Covariance of two grid increments of B^H that are ``k`` steps apart.

    Equals h^{2H} rho(k); at k = 0 this is the increment variance h^{2H}.
    """
    k_arr = np.asarray(k)
    if np.any(k_arr < 0) or np.any(k_arr != np.floor(k_arr)):
        raise ValueError(f"lag must be a non-negative integer, got {k!r}")
    H = HurstParameter(H)
    out = fgn_autocovariance(k_arr, H) * float(h) ** (2.0 * H)
    return float(out) if out.ndim == 0 else out


def fgn_covariance_matrix(n: int, H, h: float = 1.0) -> np.ndarray:
    """n x n Toeplitz covariance of grid increments with step h."""
    return toeplitz(fgn_autocovariance(np.arange(n), H) * float(h) ** (2.0 * float(H)))


def _readonly(a):
    a.setflags(write=False)
    return a


def cholesky_lower(cov: np.ndarray, module: str = "fgn_engine") -> np.ndarray:
    """Lower Cholesky factor via LAPACK; failure names the first bad pivot."""
    c, info = lapack.dpotrf(np.asarray(cov, dtype=float), lower=1, clean=1)
    if info > 0:
        raise FactorizationError(pivot=int(info), size=cov.shape[0], module=module)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return c


@functools.lru_cache(maxsize=32)
def _unit_cholesky(n: int, H: float) -> np.ndarray:
    return _readonly(cholesky_lower(fgn_covariance_matrix(n, H)))


def cholesky_factor(n: int, H) -> np.ndarray:
    """Cached, read-only Cholesky factor of the unit-step fGn covariance."""
    return _unit_cholesky(int(n), float(HurstParameter(H)))


@functools.lru_cache(maxsize=32)
def _circulant_eigs(n: int, H: float) -> np.ndarray:
    r = fgn_autocovariance(np.arange(n + 1), H)
    row = np.concatenate([r, r[-2:0:-1]])
    return _readonly(np.fft.fft(row).real)


def circulant_eigenvalues(n: int, H) -> np.ndarray:
    """Eigenvalues of the 2n circulant embedding of the unit-step fGn covariance."""
    return _circulant_eigs(int(n), float(HurstParameter(H)))


def canonical_increments(raw: np.ndarray) -> np.ndarray:
    """Round increments so that prefix sums and differences invert each other exactly.

    Floating-point prefix sums do not round-trip through ``np.diff`` in general.
    The returned array differs from ``raw`` by at most a few ulps of the partial sums
    and satisfies ``np.diff(cumulate(x)) == x`` bit for bit.
    """
    x = np.asarray(raw, dtype=float)
    for _ in range(8):
        path = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x, axis=-1)], axis=-1)
        y = np.diff(path, axis=-1)
        if np.array_equal(y, x):
            return x
        x = y
    return x


def _scale(grid: UniformGrid, H: float) -> float:
    return grid.step ** float(H)


def sample_fgn_cholesky(grid: UniformGrid, H, seed: int, index: int = 0) -> FgnIncrements:
    H = HurstParameter(H)
    z = make_rng(seed, index).standard_normal(grid.n)
    raw = (cholesky_factor(grid.n, H) @ z) * _scale(grid, H)
    return FgnIncrements(canonical_increments(raw), H, grid, int(seed), int(index),
                         {"method": "cholesky"})


def _circulant_draw(lam: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    m = lam.size
    w = np.sqrt(np.clip(lam, 0.0, None) / m)
    xi = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.fft.fft(w * xi).real[:n]


def sample_fgn_circulant(grid: UniformGrid, H, seed: int, index: int = 0) -> FgnIncrements:
    H = HurstParameter(H)
    lam = circulant_eigenvalues(grid.n, H)
    if lam.min() < -EIGENVALUE_FLOOR * lam.max():
        out = sample_fgn_cholesky(grid, H, seed, index)
        out.metadata.update(method="cholesky", fallback=True,
                            min_eigenvalue=float(lam.min()))
        return out
    raw = _circulant_draw(lam, grid.n, make_rng(seed, index)) * _scale(grid, H)
    return FgnIncrements(canonical_increments(raw), H, grid, int(seed), int(index),
                         {"method": "circulant", "fallback": False})


_SAMPLERS = {"cholesky": sample_fgn_cholesky, "circulant": sample_fgn_circulant}


def sample_fgn(grid: UniformGrid, H, seed: int, index: int = 0,
               method: str = "cholesky") -> FgnIncrements:
    try:
        sampler = _SAMPLERS[method]
    except KeyError:
        raise ValueError(f"unknown sampler {method!r}; choose one of {sorted(_SAMPLERS)}")
    return sampler(grid, H, seed, index)


def sample_fgn_batch(grid: UniformGrid, H, seed: int, indices, *key: int,
                     method: str = "cholesky") -> np.ndarray:
    """Rows of fGn increments, row i drawn from stream ``(seed, *key, indices[i])``.

    Each row depends only on its own stream.  Rows agree with :func:`sample_fgn`
    to rounding (the batched product may associate sums differently).
    """
    H = HurstParameter(H)
    indices = list(indices)
    if method == "circulant":
        lam = circulant_eigenvalues(grid.n, H)
        if lam.min() >= -EIGENVALUE_FLOOR * lam.max():
            raw = np.stack([_circulant_draw(lam, grid.n, make_rng(seed, i, *key))
                            for i in indices]) * _scale(grid, H)
            return canonical_increments(raw)
    elif method != "cholesky":
        raise ValueError(f"unknown sampler {method!r}; choose one of {sorted(_SAMPLERS)}")
    z = np.empty((len(indices), grid.n))
    for row, i in enumerate(indices):
        z[row] = make_rng(seed, i, *key).standard_normal(grid.n)
    raw = (z @ cholesky_factor(grid.n, H).T) * _scale(grid, H)
    return canonical_increments(raw)


def cumulate(increments: FgnIncrements) -> FbmPath:
    """Prefix sums with a leading zero."""
    x = increments.values
    values = np.concatenate([[0.0], np.cumsum(x)])
    return FbmPath(values, increments.hurst, increments.grid, increments.seed, increments.index)
