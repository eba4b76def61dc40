"""Monte Carlo tables, CLT diagnostics and their CSV/JSON reports.

Replication ``i`` of a cell always draws from the stream ``(seed, cell_tag, i)``
where ``cell_tag`` is a stable hash of the cell parameters, and replications are
processed in fixed-size chunks. Reports are therefore byte-identical for a given
config regardless of worker count or cell order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.special import ndtr
from scipy.stats import kstwobign

from . import __version__
from .calculus import theta_total, tilde_theta
from .errors import ConfigError
from .fgn import HurstParameter, UniformGrid
from .inference import (
    asymptotic_variance_const,
    asymptotic_variance_tail_bound,
    asymptotic_variance_tv,
    expected_qv_const,
    printed_asymptotic_variance_const,
    qv_from_log_increments,
)
from .market import sample_eta_batch, simulate_const_log_increments, tv_exponent_increments
from .volatility import Constant, PowerLaw, PowerSum, parse_vol

__all__ = [
    "ExperimentConfig",
    "CellSummary",
    "SummaryReport",
    "run_table",
    "run_clt_diagnostic",
    "theta_trend",
    "TREND_SIZES",
    "ks_statistic",
    "table_config",
    "load_config_file",
    "CSV_HEADER",
    "build_id",
]

CSV_HEADER = ("table", "H", "sigma2_or_family", "N", "r", "mean", "var", "mse",
              "target", "asyv", "ks_stat", "ks_p", "seed")
KINDS = ("table1", "table2", "table3", "table4", "table5", "custom")
DEFAULT_SEED = 12345
CHUNK = 250
MIN_CLT_REPLICATIONS = 100
TREND_SIZES = (250, 500, 1000, 2000, 4000)
NEAR_BOUNDARY = 0.7
BOUNDARY_FLAG = "near theorem boundary H=3/4, slow convergence expected"
SCOPE_FLAG = "outside CLT scope (H >= 3/4)"

_TABLE_DEFAULTS = {
    "table1": {"sigma2_list": [0.4]},
    "table2": {"sigma2_list": [1.6]},
    "table3": {"sigma2_list": [6.4]},
    "table4": {"vols": [PowerLaw(0.4, 0.3), PowerLaw(6.4, 0.3)]},
    "table5": {"vols": [PowerSum(0.4, 0.8, 2.0), PowerSum(6.4, 0.8, 2.0)]},
}


@dataclass
class ExperimentConfig:
    kind: str = "custom"
    hurst_list: list = field(default_factory=lambda: [0.55, 0.65, 0.74])
    sigma2_list: list = field(default_factory=list)
    vols: list = field(default_factory=list)
    n: int = 1000
    replications: int = 200
    seed: int = DEFAULT_SEED
    output: str | None = None
    format: str = "csv"
    method: str = "cholesky"
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}, expected one of {KINDS}", "kind")
        if not self.hurst_list:
            raise ConfigError("at least one Hurst value is required", "hurst_list")
        for h in self.hurst_list:
            if not 0 < h < 1:
                raise ConfigError(f"Hurst value {h!r} outside (0, 1)", "hurst_list")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"grid size must be an integer >= 2, got {self.n!r}", "n")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ConfigError(f"need replications >= 1, got {self.replications!r}",
                              "replications")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit non-negative integer, got {self.seed!r}",
                              "seed")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}", "format")
        if self.method not in ("cholesky", "circulant"):
            raise ConfigError(f"unknown sampler {self.method!r}", "method")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}",
                              "workers")
        if any(not s2 > 0 for s2 in self.sigma2_list):
            raise ConfigError("sigma2 values must be positive", "sigma2_list")
        if self.kind == "custom" and not (self.sigma2_list or self.vols):
            raise ConfigError("custom experiments need sigma2_list or vols", "sigma2_list")
        self.n, self.replications = int(self.n), int(self.replications)
        self.seed, self.workers = int(self.seed), int(self.workers)
        return self

    def cells(self):
        """(label, sigma2 or None, vol or None) triples in report order."""
        out = [(f"{s2:g}", float(s2), None) for s2 in self.sigma2_list]
        out += [(v.label(), None, v) for v in self.vols]
        return out


def table_config(table, **overrides) -> ExperimentConfig:
    """Config for one of the five standard tables; ``table`` is 1..5 or 'tableK'."""
    kind = f"table{table}" if not str(table).startswith("table") else str(table)
    if kind not in _TABLE_DEFAULTS:
        raise ConfigError(f"no table {table!r}; choose 1..5", "table")
    base = dict(_TABLE_DEFAULTS[kind])
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(kind=kind, **base).validate()


_LIST_KEYS = {"hurst_list": float, "sigma2_list": float}
_ALIASES = {"hurst": "hurst_list", "h": "hurst_list", "sigma2": "sigma2_list",
            "vol": "vols", "r": "replications", "out": "output"}
_INT_KEYS = ("n", "replications", "seed", "workers")


def _split(text):
    return [p for p in text.replace(";", " ").replace(",", " ").split() if p]


def parse_config_mapping(raw: dict) -> dict:
    """Convert flat string key/values (config file or CLI) into config fields."""
    names = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for key, value in raw.items():
        key = _ALIASES.get(key.strip().lower(), key.strip().lower())
        if key not in names:
            raise ConfigError(f"unknown config key {key!r}", key)
        if not isinstance(value, str):
            out[key] = value
            continue
        value = value.strip()
        try:
            if key in _LIST_KEYS:
                out[key] = [float(x) for x in _split(value)]
            elif key == "vols":
                out[key] = [parse_vol(x) for x in value.split(";") if x.strip()]
            elif key in _INT_KEYS:
                out[key] = int(value)
            else:
                out[key] = value
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"cannot parse {value!r}: {exc}", key) from exc
    return out


def load_config_file(path) -> dict:
    """Read ``key = value`` lines ('#' starts a comment)."""
    raw = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}", "config") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}", "config")
        raw[key.strip()] = value.strip()
    return parse_config_mapping(raw)


def build_id() -> str:
    """Content hash of the package sources (stable across runs of the same code)."""
    h = hashlib.sha1()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return f"{__version__}+{h.hexdigest()[:12]}"


def ks_statistic(samples) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test against N(0, 1), asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 8:
        raise ValueError(f"KS test needs at least 8 samples, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("KS samples must be finite")
    cdf = ndtr(x)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n))
    return float(d), float(kstwobign.sf(math.sqrt(n) * d))


@dataclass
class CellSummary:
    table: str
    hurst: float
    label: str
    n: int
    r: int | None
    mean: float
    var: float
    mse: float
    target: float
    asyv: float = math.nan
    ks_stat: float = math.nan
    ks_p: float = math.nan
    seed: int | None = None
    flags: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def csv_row(self):
        return [self.table, self.hurst, self.label, self.n, self.r, self.mean, self.var,
                self.mse, self.target, self.asyv, self.ks_stat, self.ks_p, self.seed]

    def to_dict(self):
        d = {name: v for name, v in zip(CSV_HEADER, self.csv_row())}
        d["flags"] = list(self.flags)
        d.update(self.extra)
        return d


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else f"{float(v):.9g}"
    return str(v)


def _json_clean(obj):
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) else ("inf" if f == math.inf else
                                           "-inf" if f == -math.inf else f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_clean(obj.tolist())
    return obj


@dataclass
class SummaryReport:
    kind: str
    cells: list
    metadata: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in self.cells:
            w.writerow([_fmt(v) for v in c.csv_row()])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {"kind": self.kind, "metadata": self.metadata,
               "cells": [c.to_dict() for c in self.cells]}
        return json.dumps(_json_clean(doc), indent=2, sort_keys=True) + "\n"

    def write(self, path, fmt: str = "csv") -> None:
        text = self.to_csv() if fmt == "csv" else self.to_json()
        Path(path).write_text(text)

    def cell(self, hurst, label=None) -> CellSummary:
        for c in self.cells:
            if math.isclose(c.hurst, hurst) and (label is None or c.label == label):
                return c
        raise KeyError((hurst, label))


def _metadata(cfg, **extra):
    md = {"seed": cfg.seed, "n": cfg.n, "replications": cfg.replications,
          "method": cfg.method, "build": build_id()}
    md.update(extra)
    return md


def _cell_tag(kind_tag: str, H: float, label: str) -> int:
    return zlib.crc32(f"{kind_tag}|{H!r}|{label}".encode())


def _replicate(fn, R: int, workers: int) -> np.ndarray:
    """Apply ``fn`` to fixed index chunks 0..R-1 and stack the results in order."""
    chunks = [range(s, min(s + CHUNK, R)) for s in range(0, R, CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    return np.concatenate(parts, axis=0)


def _flags_for(H):
    flags = []
    if H >= 0.75:
        flags.append(SCOPE_FLAG)
    elif H >= NEAR_BOUNDARY:
        flags.append(BOUNDARY_FLAG)
    return flags


def _const_estimates(cfg, s2, H, tag):
    grid = UniformGrid(cfg.n)
    sigma = math.sqrt(s2)

    def chunk(idx):
        x = simulate_const_log_increments(sigma, H, grid, cfg.seed, idx, tag,
                                          method=cfg.method)
        return qv_from_log_increments(x, H, grid.step)

    return _replicate(chunk, cfg.replications, cfg.workers)


def _tv_estimates(cfg, vol, H, tag):
    """Columns: estimator, and h^{1-2H} sum eta^2 (the pure Gaussian part)."""
    grid = UniformGrid(cfg.n)
    drift = tv_exponent_increments(vol, H, grid)

    def chunk(idx):
        eta = sample_eta_batch(vol, H, grid, cfg.seed, idx, tag)
        est = qv_from_log_increments(eta + drift, H, grid.step)
        return np.column_stack([est, qv_from_log_increments(eta, H, grid.step)])

    return _replicate(chunk, cfg.replications, cfg.workers)


def _moments(est, target):
    mean = float(np.mean(est))
    var = float(np.mean((est - mean) ** 2))
    mse = float(np.mean((est - target) ** 2))
    return mean, var, mse


def _const_cell(cfg, label, s2, H):
    tag = _cell_tag("const", H, label)
    est = _const_estimates(cfg, s2, H, tag)
    mean, var, mse = _moments(est, s2)
    cell = CellSummary(cfg.kind, H, label, cfg.n, cfg.replications, mean, var, mse, s2,
                       seed=cfg.seed, flags=_flags_for(H))
    cell.extra.update(expected_mean=expected_qv_const(s2, H, cfg.n), n_var=cfg.n * var)
    if H < 0.75:
        cell.asyv = asymptotic_variance_const(s2, H)
        cell.extra["printed_asyv"] = printed_asymptotic_variance_const(s2, H)
        cell.extra["asyv_tail_bound"] = asymptotic_variance_tail_bound(s2, H)
        if est.size >= 8:
            z = math.sqrt(cfg.n) * (est - s2) / math.sqrt(cell.asyv)
            cell.ks_stat, cell.ks_p = ks_statistic(z)
    return cell, est


def _tv_cell(cfg, label, vol, H):
    HurstParameter(H).require_long_memory()
    tag = _cell_tag("tv", H, label)
    cols = _tv_estimates(cfg, vol, H, tag)
    est, gauss = cols[:, 0], cols[:, 1]
    target = tilde_theta(vol, cfg.n, H)
    mean, var, mse = _moments(est, target)
    cell = CellSummary(cfg.kind, H, label, cfg.n, cfg.replications, mean, var, mse, target,
                       seed=cfg.seed, flags=_flags_for(H))
    cell.extra.update(theta=theta_total(vol, 1.0, H), n_var=cfg.n * var)
    if H < 0.75:
        cell.asyv = asymptotic_variance_tv(vol, cfg.n, H)
        if est.size >= 8:
            sd = math.sqrt(cell.asyv)
            cell.ks_stat, cell.ks_p = ks_statistic(math.sqrt(cfg.n) * (est - target) / sd)
            ks_eta = ks_statistic(math.sqrt(cfg.n) * (gauss - target) / sd)
            cell.extra.update(ks_stat_eta=ks_eta[0], ks_p_eta=ks_eta[1])
    return cell, cols


def _theta_cell(cfg, label, vol, H):
    tt = tilde_theta(vol, cfg.n, H)
    th = theta_total(vol, 1.0, H)
    cell = CellSummary(cfg.kind, H, label, cfg.n, None, tt, 0.0, (tt - th) ** 2, th,
                       flags=_flags_for(H))
    if H < 0.75:
        cell.asyv = asymptotic_variance_tv(vol, cfg.n, H)
    cell.extra.update(tilde_theta=tt, theta=th, gap=tt - th)
    return cell


def run_table(config: ExperimentConfig) -> SummaryReport:
    """MEAN/VAR/MSE table (tables 1-3, custom) or the deterministic theta table (4-5)."""
    cfg = config.validate()
    cells = []
    for label, s2, vol in cfg.cells():
        for H in cfg.hurst_list:
            H = float(H)
            if cfg.kind in ("table4", "table5"):
                cells.append(_theta_cell(cfg, label, vol, H))
            elif vol is None or isinstance(vol, Constant):
                s2 = s2 if vol is None else vol.sigma**2
                cells.append(_const_cell(cfg, label, s2, H)[0])
            else:
                cells.append(_tv_cell(cfg, label, vol, H)[0])
    if cfg.kind in ("table4", "table5"):
        md = {"n": cfg.n, "build": build_id(), "deterministic": True}
    else:
        md = _metadata(cfg)
    return SummaryReport(cfg.kind, cells, md)


def run_clt_diagnostic(config: ExperimentConfig) -> SummaryReport:
    """KS test of the normalized estimator against N(0, 1) in every (H, vol) cell.

    Cells with H >= 3/4 are flagged and skipped.
    """
    cfg = config.validate()
    if cfg.replications < MIN_CLT_REPLICATIONS:
        raise ConfigError(
            f"a KS diagnostic needs at least {MIN_CLT_REPLICATIONS} replications "
            f"(got {cfg.replications}); several thousand are recommended",
            "replications",
        )
    cells = []
    for label, s2, vol in cfg.cells():
        for H in cfg.hurst_list:
            H = float(H)
            if H >= 0.75:
                cells.append(CellSummary("clt", H, label, cfg.n, cfg.replications,
                                         math.nan, math.nan, math.nan, math.nan,
                                         seed=cfg.seed, flags=_flags_for(H) + ["skipped"]))
                continue
            if vol is None or isinstance(vol, Constant):
                s2 = s2 if vol is None else vol.sigma**2
                cell, _ = _const_cell(cfg, label, s2, H)
            else:
                cell, _ = _tv_cell(cfg, label, vol, H)
            cell.table = "clt"
            cells.append(cell)
    return SummaryReport("clt", cells, _metadata(cfg))


def theta_trend(vol, H, sizes=TREND_SIZES) -> list[dict]:
    """tilde_theta across grid sizes next to theta and int sigma^2, without a verdict.

    Whether tilde_theta settles as N grows is left to the reader of the numbers.
    """
    th = theta_total(vol, 1.0, H)
    rows = []
    for n in sizes:
        tt = tilde_theta(vol, int(n), H)
        rows.append({"n": int(n), "tilde_theta": tt, "theta": th, "gap": tt - th,
                     "integrated_variance": vol.integrated_variance(1.0)})
    return rows
