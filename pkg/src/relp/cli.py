"""Command-line entry point: backtests, strategy comparisons, grid sweeps.

Configuration precedence is CLI flags > JSON config file > defaults. All
outputs are UTF-8 CSV/JSON, deterministic for a fixed dataset and config
(independent of the parallelism setting); RELP_THREADS caps the worker pool.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import backend, metrics, schemes, strategies
from .errors import ConfigError, RelpError
from .market_data import FORMAT_PRICES, FORMAT_RELATIVES, load_relatives
from .transaction_cost import CostSpec

DEFAULTS = {
    "format": FORMAT_RELATIVES,
    "gamma": [0.0, 0.002, 0.005],
    "out": ".",
    "seed": 0,
    "parallel": True,
    "params": {},
}

HIGHER_IS_BETTER = {
    "cumulative_wealth": True, "mer": True, "sharpe_daily": True,
    "calmar": True, "information_ratio": True,
    "max_drawdown": False, "var95": False, "average_turnover": False,
}


def known_strategies() -> list[str]:
    return ["ubah", "ucrp", "eg", "olmar", "relp", "relp-adap-1",
            "relp-adap-2", "relp-pool"]


def make_strategy(name: str, gamma: float, params: dict) -> strategies.Strategy:
    p = dict(params)
    window = int(p.pop("window", 5))
    if name == "ubah":
        return strategies.ubah()
    if name == "ucrp":
        return strategies.ucrp()
    if name == "eg":
        return strategies.eg_strategy(eta=float(p.pop("eta", 0.05)))
    if name == "olmar":
        return strategies.olmar_strategy(eps=float(p.pop("eps", 10.0)),
                                         window=window)
    if name == "relp":
        lam = p.pop("lam", None)
        mult = float(p.pop("lambda_mult", 10.0))
        lam = float(lam) if lam is not None else mult * gamma
        return strategies.relp_fixed(strategies.RelpParams(
            kappa=float(p.pop("kappa", 1.0)), lam=lam, gamma=gamma,
            window=window))
    if name in ("relp-adap-1", "relp-adap-2"):
        variant = 1 if name.endswith("1") else 2
        kwargs = {}
        for key in ("sb_window", "top_k"):
            if key in p:
                kwargs[key] = int(p.pop(key))
        for key in ("delta", "z"):
            if key in p:
                kwargs[key] = float(p.pop(key))
        return schemes.relp_adap(variant, gamma=gamma, window=window, **kwargs)
    if name == "relp-pool":
        scheme = str(p.pop("scheme", "top5"))
        vary = str(p.pop("vary", "kappa"))
        lam = p.pop("lam", None)
        mult = float(p.pop("lambda_mult", 10.0))
        lam = float(lam) if lam is not None else mult * gamma
        base = strategies.RelpParams(kappa=float(p.pop("kappa", 1.0)),
                                     lam=lam, gamma=gamma, window=window)
        if vary == "kappa":
            grid = schemes.default_kappa_grid()
        else:
            grid = gamma * schemes.default_lambda_multipliers()
            if gamma == 0.0:
                raise ConfigError("lambda pool needs gamma > 0")
        return schemes.RelpPoolStrategy(scheme, vary, grid, base)
    raise ConfigError(
        f"unknown strategy {name!r}; known: {', '.join(known_strategies())}")


def _n_workers(cfg) -> int:
    cap = os.environ.get("RELP_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n if cfg["parallel"] else 1


def _run_one(relatives, name, gamma, params):
    strat = make_strategy(name, gamma, params)
    return strategies.run_backtest(relatives, strat, CostSpec(gamma)), strat


def _market_wealth(relatives, gamma, cache):
    if gamma not in cache:
        cache[gamma] = strategies.run_backtest(
            relatives, strategies.ubah(), CostSpec(gamma)).wealth
    return cache[gamma]


def _tag(gamma: float) -> str:
    return f"{gamma:g}"


def cmd_backtest(cfg) -> int:
    relatives = load_relatives(cfg["data"], cfg["format"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    market_cache = {}
    for gamma in cfg["gamma"]:
        result, strat = _run_one(relatives, cfg["strategy"], gamma, cfg["params"])
        stem = out / f"{cfg['strategy']}_g{_tag(gamma)}"
        result.trade_log.write_csv(f"{stem}.csv")
        market = _market_wealth(relatives, gamma, market_cache)
        report = metrics.compute_report(result.wealth, result.trade_log, market)
        Path(f"{stem}.json").write_text(report.to_json() + "\n")
        if hasattr(strat, "write_trace_csv"):
            strat.write_trace_csv(f"{stem}_trace.csv")
        print(f"{cfg['strategy']} gamma={_tag(gamma)}: "
              f"CW={report.cumulative_wealth:.6g} -> {stem}.csv/.json")
    return 0


def cmd_compare(cfg) -> int:
    names = list(dict.fromkeys(cfg["strategies"]))
    if len(names) < len(cfg["strategies"]):
        print("warning: duplicate strategy names removed", file=sys.stderr)
    if not names:
        raise ConfigError("empty strategy list")
    for n in names:
        if n not in known_strategies():
            raise ConfigError(
                f"unknown strategy {n!r}; known: {', '.join(known_strategies())}")
    relatives = load_relatives(cfg["data"], cfg["format"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    market_cache = {}
    jobs = [(name, gamma) for name in names for gamma in cfg["gamma"]]

    def run(job):
        name, gamma = job
        result, _ = _run_one(relatives, name, gamma, cfg["params"])
        return job, result

    results = {}
    workers = _n_workers(cfg)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for job, res in pool.map(run, jobs):
                results[job] = res
    else:
        for job in jobs:
            results[job] = run(job)[1]

    reports = {}
    for (name, gamma), res in sorted(results.items()):
        market = _market_wealth(relatives, gamma, market_cache)
        reports[(name, gamma)] = metrics.compute_report(
            res.wealth, res.trade_log, market)

    combined = out / "compare_metrics.csv"
    with open(combined, "w", newline="") as f:
        import csv
        w = csv.writer(f)
        w.writerow(["strategy", "gamma"] + metrics.MetricReport.csv_header())
        for name in names:
            for gamma in cfg["gamma"]:
                rep = reports[(name, gamma)]
                w.writerow([name, _tag(gamma)] + rep.csv_values())

    for metric, higher in HIGHER_IS_BETTER.items():
        path = out / f"ranking_{metric}.csv"
        with open(path, "w", newline="") as f:
            import csv
            w = csv.writer(f)
            w.writerow(["strategy"] + [f"g{_tag(g)}" for g in cfg["gamma"]])
            cols = {}
            for j, gamma in enumerate(cfg["gamma"]):
                vals = np.array([getattr(reports[(n, gamma)], metric)
                                 for n in names])
                ranked = np.full(vals.size, math.nan)
                valid = ~np.isnan(vals)
                if valid.any():
                    v = vals[valid] if higher else -vals[valid]
                    ranked[valid] = metrics.relative_ranking(v)
                cols[j] = ranked
            for i, name in enumerate(names):
                row = [name]
                for j in range(len(cfg["gamma"])):
                    x = cols[j][i]
                    row.append("NA" if math.isnan(x) else repr(float(x)))
                w.writerow(row)
    print(f"wrote {combined} and ranking_<metric>.csv for {len(names)} "
          f"strategies x {len(cfg['gamma'])} gammas")
    return 0


def cmd_sweep(cfg) -> int:
    relatives = load_relatives(cfg["data"], cfg["format"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    kg = cfg.get("kappa_grid") or [0.1, 10.0, 21]
    lg = cfg.get("lambda_mult_grid") or [0.01, 100.0, 41]
    kappas = schemes.log_grid(float(kg[0]), float(kg[1]), int(kg[2]))
    mults = schemes.log_grid(float(lg[0]), float(lg[1]), int(lg[2]))
    window = int(cfg["params"].get("window", 5))
    cells = [(float(k), float(mult), float(g))
             for k in kappas for mult in mults for g in cfg["gamma"]]

    def run(cell):
        kappa, mult, gamma = cell
        lam = mult * gamma
        strat = strategies.relp_fixed(strategies.RelpParams(
            kappa=kappa, lam=lam, gamma=gamma, window=window))
        res = strategies.run_backtest(relatives, strat, CostSpec(gamma))
        ws = res.wealth
        return cell, (lam, metrics.cumulative_wealth(ws),
                      metrics.sharpe_daily(ws), metrics.max_drawdown(ws),
                      metrics.calmar(ws))

    rows = {}
    workers = _n_workers(cfg)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for cell, vals in pool.map(run, cells):
                rows[cell] = vals
    else:
        for cell in cells:
            rows[cell] = run(cell)[1]

    path = out / "sweep.csv"
    with open(path, "w", newline="") as f:
        import csv
        w = csv.writer(f)
        w.writerow(["kappa", "lambda", "gamma", "cumulative_wealth",
                    "sharpe_daily", "max_drawdown", "calmar", "flag"])
        for cell in sorted(rows):
            kappa, mult, gamma = cell
            lam, cw, sr, mdd, cal = rows[cell]
            fmt = lambda v: "NA" if isinstance(v, float) and math.isnan(v) else repr(float(v))
            w.writerow([repr(kappa), repr(lam), _tag(gamma), fmt(cw), fmt(sr),
                        fmt(mdd), fmt(cal),
                        "lambda_zero" if lam == 0.0 else ""])
    print(f"wrote {path}: {len(rows)} rows "
          f"({len(kappas)} kappa x {len(mults)} lambda x {len(cfg['gamma'])} gamma)")
    return 0


def _parse_params(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--param expects key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parse_gammas(text) -> list[float]:
    vals = [float(x) for x in text.split(",") if x.strip() != ""]
    for g in vals:
        if not 0 <= g < 1:
            raise ConfigError(f"gamma {g} outside [0, 1)")
    return vals


def _parse_grid(text) -> list:
    lo, hi, count = text.split(",")
    return [float(lo), float(hi), int(count)]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="relp",
        description="Cost-aware robust online portfolio selection backtests")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--data", help="CSV of price relatives or prices")
        sp.add_argument("--format", choices=[FORMAT_RELATIVES, FORMAT_PRICES])
        sp.add_argument("--gamma", type=_parse_gammas,
                        help="comma-separated proportional cost rates")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--param", action="append",
                        help="strategy parameter override key=value")
        par = sp.add_mutually_exclusive_group()
        par.add_argument("--parallel", dest="parallel", action="store_true",
                         default=None)
        par.add_argument("--serial", dest="parallel", action="store_false",
                         default=None)

    bt = sub.add_parser("backtest", help="run one strategy, write logs+metrics")
    common(bt)
    bt.add_argument("--strategy", help="strategy name")

    cp = sub.add_parser("compare", help="metrics and relative rankings")
    common(cp)
    cp.add_argument("--strategies", help="comma-separated strategy names")

    sw = sub.add_parser("sweep", help="kappa x lambda sensitivity grid")
    common(sw)
    sw.add_argument("--kappa-grid", type=_parse_grid,
                    help="lo,hi,count (log-spaced, inclusive)")
    sw.add_argument("--lambda-mult-grid", type=_parse_grid,
                    help="lo,hi,count multipliers of gamma")
    return ap


def _merge_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as f:
            cfg.update(json.load(f))
    for key in ("data", "format", "gamma", "out", "seed", "parallel"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    file_params = dict(cfg.get("params") or {})
    file_params.update(_parse_params(getattr(args, "param", None)))
    cfg["params"] = file_params
    if getattr(args, "strategy", None) is not None:
        cfg["strategy"] = args.strategy
    if getattr(args, "strategies", None) is not None:
        cfg["strategies"] = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if getattr(args, "kappa_grid", None) is not None:
        cfg["kappa_grid"] = args.kappa_grid
    if getattr(args, "lambda_mult_grid", None) is not None:
        cfg["lambda_mult_grid"] = args.lambda_mult_grid
    if isinstance(cfg.get("gamma"), (int, float)):
        cfg["gamma"] = [float(cfg["gamma"])]
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        if not cfg.get("data"):
            raise ConfigError("--data is required")
        backend.set_num_threads(_n_workers(cfg))
        if args.command == "backtest":
            if not cfg.get("strategy"):
                raise ConfigError("--strategy is required")
            if cfg["strategy"] not in known_strategies():
                raise ConfigError(f"unknown strategy {cfg['strategy']!r}; "
                                  f"known: {', '.join(known_strategies())}")
            return cmd_backtest(cfg)
        if args.command == "compare":
            if not cfg.get("strategies"):
                raise ConfigError("--strategies is required")
            return cmd_compare(cfg)
        return cmd_sweep(cfg)
    except (RelpError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
