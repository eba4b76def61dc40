"""Deterministic volatility functions sigma(t) and their string/CSV forms.

All variants expose ``cell_means(edges)``: the exact average of sigma over each
interval ``[edges[i], edges[i+1]]``, computed from a closed-form antiderivative.
The fractional quadratic functionals are built on these averages.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fgn import UniformGrid

__all__ = [
    "Constant",
    "PowerLaw",
    "PowerSum",
    "Tabulated",
    "VolatilitySpec",
    "parse_vol",
    "VOL_GRAMMAR",
]

VOL_GRAMMAR = (
    "const:SIGMA | pow:SIGMA,ALPHA (sigma*t^alpha) | "
    "powsum:SIGMA,ALPHA,BETA (sigma*(t^alpha+t^beta)) | tab:CSV_PATH"
)


class _Vol:
    piecewise_constant = False

    def __call__(self, t):
        raise NotImplementedError

    def antiderivative(self, t):
        raise NotImplementedError

    def cell_means(self, edges) -> np.ndarray:
        e = np.asarray(edges, dtype=float)
        F = self.antiderivative(e)
        return np.diff(F) / np.diff(e)

    def integrated_variance(self, t: float = 1.0) -> float:
        """Reference value of int_0^t sigma(s)^2 ds."""
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(_Vol):
    sigma: float
    piecewise_constant = True

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"volatility must be non-negative, got {self.sigma!r}")

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.sigma)

    def antiderivative(self, t):
        return self.sigma * np.asarray(t, dtype=float)

    def cell_means(self, edges):
        return np.full(len(edges) - 1, float(self.sigma))

    def bound(self, horizon: float = 1.0) -> float:
        return float(self.sigma)

    def scaled(self, c: float) -> "Constant":
        return Constant(self.sigma * c)

    def integrated_variance(self, t=1.0):
        return self.sigma**2 * t

    def label(self):
        return f"const:{self.sigma:g}"


@dataclass(frozen=True)
class PowerLaw(_Vol):
    """sigma * t**alpha with 0 < alpha < 1."""

    sigma: float
    alpha: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    def __call__(self, t):
        return self.sigma * np.asarray(t, dtype=float) ** self.alpha

    def antiderivative(self, t):
        a = self.alpha + 1.0
        return self.sigma * np.asarray(t, dtype=float) ** a / a

    def bound(self, horizon=1.0):
        return self.sigma * horizon**self.alpha

    def scaled(self, c):
        return PowerLaw(self.sigma * c, self.alpha)

    def integrated_variance(self, t=1.0):
        p = 2 * self.alpha + 1
        return self.sigma**2 * t**p / p

    def label(self):
        return f"pow:{self.sigma:g},{self.alpha:g}"


@dataclass(frozen=True)
class PowerSum(_Vol):
    """sigma * (t**alpha + t**beta) with 0 < alpha < 1 < beta."""

    sigma: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not self.beta > 1:
            raise ValueError(f"beta must exceed 1, got {self.beta!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.sigma * (t**self.alpha + t**self.beta)

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.alpha + 1.0, self.beta + 1.0
        return self.sigma * (t**a / a + t**b / b)

    def bound(self, horizon=1.0):
        return self.sigma * (horizon**self.alpha + horizon**self.beta)

    def scaled(self, c):
        return PowerSum(self.sigma * c, self.alpha, self.beta)

    def integrated_variance(self, t=1.0):
        a, b = self.alpha, self.beta
        return self.sigma**2 * (
            t ** (2 * a + 1) / (2 * a + 1)
            + 2 * t ** (a + b + 1) / (a + b + 1)
            + t ** (2 * b + 1) / (2 * b + 1)
        )

    def label(self):
        return f"powsum:{self.sigma:g},{self.alpha:g},{self.beta:g}"


@dataclass(frozen=True)
class Tabulated(_Vol):
    """Piecewise-constant sigma: ``values[i]`` on ``[i*step, (i+1)*step)``."""

    grid: UniformGrid
    values: tuple
    piecewise_constant = True

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) != self.grid.n:
            raise ValueError(f"expected {self.grid.n} tabulated values, got {len(vals)}")
        if any(not v >= 0 for v in vals):
            raise ValueError("tabulated volatility values must be non-negative")
        object.__setattr__(self, "values", vals)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values)

    def edges(self) -> np.ndarray:
        return self.grid.times()

    def _check_range(self, t):
        if np.any(t < 0) or np.any(t > self.grid.horizon * (1 + 1e-12)):
            raise ValueError(
                f"tabulated volatility is only defined on [0, {self.grid.horizon}]"
            )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        self._check_range(t)
        idx = np.minimum((t / self.grid.step).astype(int), self.grid.n - 1)
        return self.array[idx]

    def antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        self._check_range(t)
        knots = self.edges()
        cum = np.concatenate([[0.0], np.cumsum(self.array * self.grid.step)])
        return np.interp(t, knots, cum)

    def bound(self, horizon=None):
        return max(self.values)

    def scaled(self, c):
        return Tabulated(self.grid, tuple(v * c for v in self.values))

    def integrated_variance(self, t=None):
        t = self.grid.horizon if t is None else t
        e = self.edges()
        w = np.clip(np.minimum(e[1:], t) - e[:-1], 0.0, None)
        return float(np.sum(self.array**2 * w))

    def label(self):
        return f"tab:{self.grid.n}cells"

    @classmethod
    def from_csv(cls, path, horizon: float | None = None) -> "Tabulated":
        """Read one column ``sigma`` or two columns ``t,sigma`` (t = left cell edges).

        A header row is skipped if present. With two columns and at least two rows the
        horizon is inferred from the uniform spacing of ``t``; otherwise it defaults to 1.
        """
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or not "".join(rec).strip():
                    continue
                try:
                    rows.append([float(x) for x in rec])
                except ValueError:
                    if rows:
                        raise ConfigError(f"non-numeric row {rec!r} in {path}", "vol")
        if not rows:
            raise ConfigError(f"no volatility values in {path}", "vol")
        width = {len(r) for r in rows}
        if width == {1}:
            values = [r[0] for r in rows]
            h = horizon if horizon is not None else 1.0
        elif width == {2}:
            t = np.array([r[0] for r in rows])
            values = [r[1] for r in rows]
            if horizon is not None:
                h = horizon
            elif len(t) >= 2:
                dt = np.diff(t)
                if abs(t[0]) > 1e-12 or np.ptp(dt) > 1e-9 * dt.mean():
                    raise ConfigError(f"times in {path} must be uniform and start at 0", "vol")
                h = dt.mean() * len(t)
            else:
                h = 1.0
        else:
            raise ConfigError(f"{path}: expected 1 or 2 columns", "vol")
        return cls(UniformGrid(len(values), h), tuple(values))


VolatilitySpec = Constant | PowerLaw | PowerSum | Tabulated


def _numbers(body: str, count: int, text: str):
    try:
        vals = [float(x) for x in body.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse numbers in {text!r}; grammar: {VOL_GRAMMAR}", "vol")
    if len(vals) != count:
        raise ConfigError(f"{text!r} needs {count} number(s); grammar: {VOL_GRAMMAR}", "vol")
    return vals


def parse_vol(text: str) -> VolatilitySpec:
    """Parse the volatility mini-grammar, see :data:`VOL_GRAMMAR`."""
    kind, sep, body = text.strip().partition(":")
    if not sep:
        raise ConfigError(f"missing ':' in {text!r}; grammar: {VOL_GRAMMAR}", "vol")
    kind = kind.lower()
    try:
        if kind == "const":
            return Constant(*_numbers(body, 1, text))
        if kind == "pow":
            return PowerLaw(*_numbers(body, 2, text))
        if kind == "powsum":
            return PowerSum(*_numbers(body, 3, text))
        if kind == "tab":
            if not Path(body).is_file():
                raise ConfigError(f"tabulated volatility file not found: {body}", "vol")
            return Tabulated.from_csv(body)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), "vol") from exc
    raise ConfigError(f"unknown volatility kind {kind!r}; grammar: {VOL_GRAMMAR}", "vol")
