"""Command-line interface: ``fbmvol <subcommand> ...`` (or ``python3 -m fbmvol``).

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .calculus import theta_report
from .errors import ConfigError, NumericalError
from .fgn import UniformGrid
from .harness import (
    DEFAULT_SEED,
    ExperimentConfig,
    _json_clean,
    load_config_file,
    run_clt_diagnostic,
    run_table,
    table_config,
    theta_trend,
)
from .inference import asymptotic_variance_tv, estimate_report
from .market import read_price_csv, simulate_const, simulate_tv
from .pricing import call_from_total_variance, call_price_tv, total_variance_const
from .volatility import VOL_GRAMMAR, Constant, parse_vol

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _vol(text):
    try:
        return parse_vol(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _emit(doc, out=None):
    text = json.dumps(_json_clean(doc), indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def cmd_simulate(args):
    grid = UniformGrid(args.n, args.horizon)
    vol = args.vol
    if isinstance(vol, Constant):
        path = simulate_const(args.s0, vol.sigma, args.h, grid, args.seed, mu=args.mu,
                              index=args.index, method=args.method)
    else:
        if args.mu != 0:
            raise ConfigError("a drift is only supported for constant volatility", "mu")
        path = simulate_tv(args.s0, vol, args.h, grid, args.seed, index=args.index)
    path.to_csv(args.out)
    print(args.out)


def cmd_estimate(args):
    path = read_price_csv(args.input)
    _emit(estimate_report(path, args.h, level=args.level).to_dict(), args.out)


def cmd_theta(args):
    rep = theta_report(args.vol, args.n, args.h, args.horizon)
    doc = rep.to_dict()
    doc["vol"] = args.vol.label()
    if args.h < 0.75:
        doc["asymptotic_variance"] = asymptotic_variance_tv(args.vol, args.n, args.h,
                                                            args.horizon)
    if args.summary:
        doc.pop("theta_cells")
        doc.pop("deltas")
    if args.trend:
        doc["trend"] = theta_trend(args.vol, args.h)
    _emit(doc, args.out)


def cmd_price(args):
    tau = args.bigt - args.t
    if not 0 <= args.t <= args.bigt:
        raise ConfigError(f"need 0 <= t <= T, got t={args.t}, T={args.bigt}", "t")
    rate = args.rtilde if args.rtilde is not None else (args.r or 0.0) * tau
    vol = Constant(args.sigma) if args.sigma is not None else args.vol
    if isinstance(vol, Constant):
        v = total_variance_const(vol.sigma**2, args.h, args.t, args.bigt)
        quote = call_from_total_variance(args.s, args.k, rate, v, hurst=args.h,
                                         t=args.t, maturity=args.bigt)
    else:
        quote = call_price_tv(args.s, args.k, rate, vol, args.h, args.t, args.bigt)
    _emit(quote.to_dict(), args.out)


def _experiment(args, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Config from (table defaults or file) with CLI flags layered on top."""
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    flags = {k: getattr(args, k, None) for k in ("n", "replications", "seed", "workers",
                                                 "method", "format")}
    flags = {k: v for k, v in flags.items() if v is not None}
    if base is None:
        base = ExperimentConfig()
    values = {**base.__dict__, **file_values, **flags}
    return ExperimentConfig(**values).validate()


def cmd_reproduce(args):
    base = table_config(args.table)
    cfg = _experiment(args, base)
    report = run_table(cfg)
    text = report.to_csv() if cfg.format == "csv" else report.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)


def cmd_ks(args):
    over = {}
    if args.h is not None:
        over["hurst_list"] = [args.h]
    if args.sigma2 is not None:
        over["sigma2_list"] = [args.sigma2]
    if args.vol is not None:
        over["vols"] = [args.vol]
        over.setdefault("sigma2_list", [])
    base = ExperimentConfig(kind="custom", replications=5000)
    if args.config:
        base = ExperimentConfig(**{**base.__dict__, **load_config_file(args.config)})
    base = ExperimentConfig(**{**base.__dict__, **over})
    args.config = None
    cfg = _experiment(args, base)
    report = run_clt_diagnostic(cfg)
    doc = {"metadata": report.metadata, "cells": [c.to_dict() for c in report.cells]}
    _emit(doc, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fbmvol",
        description="Fractional Black-Scholes toolkit: simulation, volatility "
                    "estimation, option pricing and table reproduction.",
        epilog=f"Volatility specs: {VOL_GRAMMAR}",
    )
    sub = p.add_subparsers(dest="command", required=True)
    vol_help = f"volatility spec, {VOL_GRAMMAR}"

    s = sub.add_parser("simulate", help="simulate a price path to CSV (t,S)")
    s.add_argument("--h", type=float, required=True, help="Hurst parameter")
    s.add_argument("--vol", type=_vol, required=True, help=vol_help)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--mu", type=float, default=0.0)
    s.add_argument("--s0", type=float, default=1.0)
    s.add_argument("--horizon", type=float, default=1.0)
    s.add_argument("--index", type=int, default=0, help="replication index")
    s.add_argument("--method", choices=("cholesky", "circulant"), default="cholesky")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate sigma^2 from a price CSV")
    e.add_argument("--input", required=True)
    e.add_argument("--h", type=float, required=True)
    e.add_argument("--level", type=float, default=0.95)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    t = sub.add_parser("theta", help="theta, tilde_theta and per-cell energies")
    t.add_argument("--vol", type=_vol, required=True, help=vol_help)
    t.add_argument("--h", type=float, required=True)
    t.add_argument("--n", type=int, default=1000)
    t.add_argument("--horizon", type=float, default=1.0)
    t.add_argument("--summary", action="store_true", help="omit per-cell arrays")
    t.add_argument("--trend", action="store_true",
                   help="add tilde_theta for N = 250, 500, 1000, 2000, 4000")
    t.add_argument("--out")
    t.set_defaults(func=cmd_theta)

    c = sub.add_parser("price", help="European call price")
    c.add_argument("--s", type=float, required=True, help="spot")
    c.add_argument("--k", type=float, required=True, help="strike")
    rg = c.add_mutually_exclusive_group()
    rg.add_argument("--r", type=float, help="constant short rate")
    rg.add_argument("--rtilde", type=float, help="integrated rate over [t, T]")
    vg = c.add_mutually_exclusive_group(required=True)
    vg.add_argument("--sigma", type=float)
    vg.add_argument("--vol", type=_vol, help=vol_help)
    c.add_argument("--h", type=float, required=True)
    c.add_argument("--t", type=float, default=0.0)
    c.add_argument("--bigt", type=float, required=True, help="maturity T")
    c.add_argument("--out")
    c.set_defaults(func=cmd_price)

    for name, func, helptext in (("reproduce", cmd_reproduce, "reproduce a table"),
                                 ("ks", cmd_ks, "KS normality diagnostic")):
        r = sub.add_parser(name, help=helptext)
        if name == "reproduce":
            r.add_argument("--table", type=int, choices=range(1, 6), required=True)
            r.add_argument("--format", choices=("csv", "json"))
        else:
            r.add_argument("--h", type=float)
            r.add_argument("--sigma2", type=float)
            r.add_argument("--vol", type=_vol, help=vol_help)
        r.add_argument("--n", type=int)
        r.add_argument("--r", dest="replications", type=int)
        r.add_argument("--seed", type=int)
        r.add_argument("--workers", type=int)
        r.add_argument("--method", choices=("cholesky", "circulant"))
        r.add_argument("--config", help="flat key = value file; flags override it")
        r.add_argument("--out")
        r.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"fbmvol {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        if not isinstance(exc, NumericalError):
            exc = NumericalError(str(exc) or type(exc).__name__, module=args.command)
        print(f"fbmvol {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
