"""Quadratic functionals of the fractional integral operator for H in (1/2, 1).

Only inner products of the form

    <f, g>_H = H (2H - 1) * int int f(s) g(t) |s - t|^{2H-2} ds dt

are ever needed, with f and g volatility-weighted windows sigma(.) 1_[a, b]. The
operator itself is never applied pointwise.

The weakly singular double integral is evaluated exactly for piecewise-constant
integrands: for two intervals I, J

    H (2H - 1) int_I int_J |s - t|^{2H-2} ds dt = Cov(B^H(I), B^H(J)),

the covariance of the fBm increments over I and J, a double difference of
|u|^{2H}.  Non-constant volatilities are replaced by their cell averages on a
uniform mesh (default 4096 cells) before applying this identity.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import matmul_toeplitz

from .errors import IdentityOperatorRegime, RegimeError
from .fgn import HurstParameter, fgn_autocovariance
from .volatility import Constant, Tabulated

__all__ = [
    "DEFAULT_RESOLUTION",
    "Window",
    "ThetaReport",
    "c_h",
    "interval_covariance",
    "h_inner",
    "gram",
    "theta_total",
    "theta_cell",
    "theta_cells",
    "tilde_theta",
    "delta_cell",
    "cell_gram",
    "theta_report",
]

#: cells used to discretize a non-piecewise-constant volatility on a window
DEFAULT_RESOLUTION = 4096
#: per-window cells for cross inner products of two different windows
INNER_RESOLUTION = 512
#: largest per-cell refinement accepted to represent a tabulated volatility exactly
_MAX_EXACT_REFINEMENT = 256


def _long_memory(H) -> HurstParameter:
    H = HurstParameter(H)
    if H <= 0.5:
        raise RegimeError(
            f"H={float(H)}: the kernel representation used here requires H > 1/2"
        )
    return H


def c_h(H) -> float:
    """Normalizing constant of the fractional integral operator.

    [Gamma(2H+1) sin(pi H)]^{1/2} / [2 Gamma(H - 1/2) cos(pi (H - 1/2) / 2)].
    At H = 1/2 the operator is the identity and :class:`IdentityOperatorRegime`
    is raised; callers are expected to special-case it.
    """
    H = float(HurstParameter(H))
    if H == 0.5:
        raise IdentityOperatorRegime("H = 1/2: the operator is the identity (no constant)")
    num = math.sqrt(math.gamma(2 * H + 1) * math.sin(math.pi * H))
    den = 2 * math.gamma(H - 0.5) * math.cos(0.5 * math.pi * (H - 0.5))
    return num / den


@dataclass(frozen=True)
class Window:
    """The function s -> vol(s) * 1_[start, end](s)."""

    vol: object
    start: float
    end: float

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValueError(f"window needs 0 <= start <= end, got [{self.start}, {self.end}]")


def interval_covariance(edges_a, edges_b, H) -> np.ndarray:
    """Matrix of Cov(B^H(I_i), B^H(J_j)) for consecutive intervals of two meshes."""
    a = 2.0 * float(H)
    ea = np.asarray(edges_a, dtype=float)
    eb = np.asarray(edges_b, dtype=float)
    lo_a, hi_a = ea[:-1, None], ea[1:, None]
    lo_b, hi_b = eb[None, :-1], eb[None, 1:]
    return 0.5 * (
        np.abs(hi_b - lo_a) ** a
        + np.abs(lo_b - hi_a) ** a
        - np.abs(hi_b - hi_a) ** a
        - np.abs(lo_b - lo_a) ** a
    )


def _discretize(vol, a: float, b: float, resolution: int):
    """Piecewise-constant representation (edges, values, uniform) of vol on [a, b]."""
    if isinstance(vol, Constant):
        return np.array([a, b]), np.array([vol.sigma]), True
    if isinstance(vol, Tabulated):
        knots = vol.edges()
        inner = knots[(knots > a) & (knots < b)]
        edges = np.concatenate([[a], inner, [b]])
        widths = np.diff(edges)
        uniform = bool(np.ptp(widths) <= 1e-12 * widths.max()) if widths.size else True
        return edges, vol.cell_means(edges), uniform
    edges = np.linspace(a, b, resolution + 1)
    return edges, vol.cell_means(edges), True


def _toeplitz_energy(values: np.ndarray, h: float, H: float) -> float:
    n = values.size
    c = fgn_autocovariance(np.arange(n), H)
    if n <= 256:
        tv = np.asarray([c[np.abs(np.arange(n) - i)] @ values for i in range(n)])
    else:
        tv = matmul_toeplitz(c, values)
    return float(values @ tv) * h ** (2.0 * H)


def _window_energy(vol, a, b, H, resolution):
    if b <= a:
        return 0.0
    edges, vals, uniform = _discretize(vol, a, b, resolution)
    if uniform:
        return _toeplitz_energy(vals, (b - a) / vals.size, float(H))
    return float(vals @ interval_covariance(edges, edges, H) @ vals)


def h_inner(f: Window, g: Window, H, resolution: int = INNER_RESOLUTION) -> float:
    """<f, g>_H for two volatility-weighted windows (H > 1/2).

    Exact for constant and tabulated volatilities; otherwise each window is
    discretized into ``resolution`` cells.
    """
    H = _long_memory(H)
    if f == g:
        return _window_energy(f.vol, f.start, f.end, H, resolution)
    if f.end <= f.start or g.end <= g.start:
        return 0.0
    ef, vf, _ = _discretize(f.vol, f.start, f.end, resolution)
    eg, vg, _ = _discretize(g.vol, g.start, g.end, resolution)
    return float(vf @ interval_covariance(ef, eg, H) @ vg)


def gram(windows, H, resolution: int = INNER_RESOLUTION) -> np.ndarray:
    """Gram matrix of <w_i, w_j>_H over a family of windows."""
    H = _long_memory(H)
    parts = [_discretize(w.vol, w.start, w.end, resolution) for w in windows]
    n = len(windows)
    G = np.zeros((n, n))
    for i in range(n):
        ei, vi, _ = parts[i]
        for j in range(i, n):
            ej, vj, _ = parts[j]
            G[i, j] = G[j, i] = vi @ interval_covariance(ei, ej, H) @ vj
    return G


def theta_total(vol, t: float, H, resolution: int = DEFAULT_RESOLUTION) -> float:
    """theta(t) = <vol 1_[0,t], vol 1_[0,t]>_H, the variance of int_0^t vol dB^H."""
    H = _long_memory(H)
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    return _window_energy(vol, 0.0, float(t), H, resolution)


# ---------------------------------------------------------------------------
# cell quantities on the grid k*h, h = horizon / N
# ---------------------------------------------------------------------------


def _refinement(vol, N: int, horizon: float, resolution: int) -> int:
    if isinstance(vol, Constant):
        return 1
    if isinstance(vol, Tabulated) and math.isclose(vol.grid.horizon, horizon, rel_tol=1e-12):
        m = math.lcm(N, vol.grid.n) // N
        if m <= _MAX_EXACT_REFINEMENT:
            return m
    return max(1, -(-resolution // N))


@dataclass(frozen=True)
class _CellMesh:
    N: int
    m: int
    sub_step: float
    means: np.ndarray  # (N, m) cell averages of vol on the sub-mesh
    lag_cov: np.ndarray  # Cov of sub-cell increments at lags 0..N*m-1


@functools.lru_cache(maxsize=64)
def _cell_mesh(vol, N: int, H: float, horizon: float, resolution: int) -> _CellMesh:
    m = _refinement(vol, N, horizon, resolution)
    M = N * m
    hs = horizon / M
    edges = np.arange(M + 1) * hs
    edges[-1] = horizon
    means = vol.cell_means(edges).reshape(N, m)
    c = fgn_autocovariance(np.arange(M), H) * hs ** (2.0 * H)
    means.setflags(write=False)
    c.setflags(write=False)
    return _CellMesh(N, m, hs, means, c)


def _mesh(vol, N, H, horizon, resolution) -> _CellMesh:
    if int(N) != N or N < 1:
        raise ValueError(f"number of cells must be a positive integer, got {N!r}")
    H = _long_memory(H)
    return _cell_mesh(vol, int(N), float(H), float(horizon), int(resolution))


def _cell_diagonal(mesh: _CellMesh) -> np.ndarray:
    m = mesh.m
    local = mesh.lag_cov[np.abs(np.subtract.outer(np.arange(m), np.arange(m)))]
    return np.einsum("kp,pq,kq->k", mesh.means, local, mesh.means)


def _gram_row(mesh: _CellMesh, k: int) -> np.ndarray:
    m, S, c = mesh.m, mesh.means, mesh.lag_cov
    base = (np.arange(mesh.N) - k) * m
    row = np.zeros(mesh.N)
    for p in range(m):
        for q in range(m):
            row += S[k, p] * S[:, q] * c[np.abs(base + q - p)]
    return row


def _check_cell(k, N):
    if int(k) != k or not 0 <= k < N:
        raise IndexError(f"cell index {k!r} outside 0..{N - 1}")
    return int(k)


def theta_cell(vol, k: int, N: int, H, horizon: float = 1.0,
               resolution: int = DEFAULT_RESOLUTION) -> float:
    """theta_k = <f_k, f_k>_H with f_k = vol on the k-th of N cells."""
    mesh = _mesh(vol, N, H, horizon, resolution)
    k = _check_cell(k, N)
    m = mesh.m
    local = mesh.lag_cov[np.abs(np.subtract.outer(np.arange(m), np.arange(m)))]
    s = mesh.means[k]
    return float(s @ local @ s)


def theta_cells(vol, N: int, H, horizon: float = 1.0,
                resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    return _cell_diagonal(_mesh(vol, N, H, horizon, resolution))


def tilde_theta(vol, N: int, H, horizon: float = 1.0,
                resolution: int = DEFAULT_RESOLUTION) -> float:
    """Rescaled cell-energy sum h^{1-2H} * sum_k theta_k, h = horizon / N."""
    H = _long_memory(H)
    h = horizon / N
    return float(h ** (1.0 - 2.0 * H) * theta_cells(vol, N, H, horizon, resolution).sum())


def delta_cell(vol, k: int, N: int, H, horizon: float = 1.0,
               resolution: int = DEFAULT_RESOLUTION) -> float:
    """delta_k = theta(t_{k+1}) - theta(t_k) = theta_k + 2 sum_{j<k} <f_k, f_j>_H."""
    mesh = _mesh(vol, N, H, horizon, resolution)
    k = _check_cell(k, N)
    row = _gram_row(mesh, k)
    return float(row[k] + 2.0 * row[:k].sum())


@functools.lru_cache(maxsize=16)
def _cell_gram(vol, N, H, horizon, resolution):
    mesh = _cell_mesh(vol, N, H, horizon, resolution)
    m, S, c = mesh.m, mesh.means, mesh.lag_cov
    lag = np.subtract.outer(np.arange(N), np.arange(N)) * m  # (j - k) * m, indexed [k, j]
    lag = -lag
    G = np.zeros((N, N))
    for p in range(m):
        for q in range(m):
            G += np.outer(S[:, p], S[:, q]) * c[np.abs(lag + q - p)]
    G = 0.5 * (G + G.T)
    G.setflags(write=False)
    return G


def cell_gram(vol, N: int, H, horizon: float = 1.0,
              resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
    """N x N matrix of <f_k, f_j>_H (read-only, cached)."""
    if int(N) != N or N < 1:
        raise ValueError(f"number of cells must be a positive integer, got {N!r}")
    H = _long_memory(H)
    return _cell_gram(vol, int(N), float(H), float(horizon), int(resolution))


@dataclass(frozen=True)
class ThetaReport:
    theta_total: float
    theta_cells: np.ndarray
    tilde_theta: float
    deltas: np.ndarray
    hurst: float
    n: int
    horizon: float = 1.0
    refinement: int = 1
    quadrature_gap: float = 0.0

    def theta_path(self) -> np.ndarray:
        """theta(t_m) for m = 0..n, accumulated from the deltas."""
        return np.concatenate([[0.0], np.cumsum(self.deltas)])

    def to_dict(self) -> dict:
        return {
            "hurst": self.hurst,
            "n": self.n,
            "horizon": self.horizon,
            "theta_total": self.theta_total,
            "tilde_theta": self.tilde_theta,
            "theta_cells": self.theta_cells.tolist(),
            "deltas": self.deltas.tolist(),
            "refinement": self.refinement,
            "quadrature_gap": self.quadrature_gap,
        }


def theta_report(vol, N: int, H, horizon: float = 1.0,
                 resolution: int = DEFAULT_RESOLUTION) -> ThetaReport:
    """All cell quantities on one mesh so that sum(deltas) == theta_total telescopes.

    ``quadrature_gap`` is the relative change of theta(horizon) when the default
    discretization is doubled (zero for piecewise-constant volatilities).
    """
    H = _long_memory(H)
    mesh = _mesh(vol, N, H, horizon, resolution)
    G = cell_gram(vol, N, H, horizon, resolution)
    diag = np.diag(G).copy()
    deltas = diag + 2.0 * np.tril(G, -1).sum(axis=1)
    total = _toeplitz_energy(mesh.means.ravel(), mesh.sub_step, float(H))
    h = horizon / N
    gap = 0.0
    if not getattr(vol, "piecewise_constant", False):
        coarse = theta_total(vol, horizon, H, resolution)
        fine = theta_total(vol, horizon, H, 2 * resolution)
        gap = abs(fine - coarse) / abs(fine) if fine else 0.0
    return ThetaReport(
        theta_total=total,
        theta_cells=diag,
        tilde_theta=float(h ** (1.0 - 2.0 * H) * diag.sum()),
        deltas=deltas,
        hurst=float(H),
        n=int(N),
        horizon=float(horizon),
        refinement=mesh.m,
        quadrature_gap=gap,
    )
