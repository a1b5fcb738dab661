"""
Command-line driver.

    ebacktest simulate CONFIG -o paths.csv [--seed N]
    ebacktest backtest INPUT.csv --measure es --p 0.975 [--method grem] [--window 500]
    ebacktest experiment SUITE [--reps N] [--jobs K] [--out-dir DIR]

Exit codes: 0 success, 2 usage, 3 bad config, 4 bad input data, 5 numeric failure.
The default seed comes from ``EBACKTEST_SEED`` when ``--seed`` is absent.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
from scipy import special

from .betting import BettingStrategy, LocationScaleAlternative, Method, StrategyError
from .eprocess import DetectionThresholds
from .estatistics import DomainError, EStatistic
from .harness import (
    SCHEMA_VERSION,
    InputError,
    backtest_arrays,
    gaming_experiment,
    run_experiment,
    stationary_spec,
    structural_experiment,
    toy_experiment,
    type1_experiment,
)
from .timeseries import ConfigError, FitError, ForecastError, forecast_stream, load_config, simulate

log = logging.getLogger("ebacktest")

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_SCHEMA = 4
EXIT_NUMERIC = 5

SUITES = ("stationary-var", "stationary-es", "structural", "gaming", "type1", "example51")
INPUT_COLUMNS = ("t", "loss", "var_forecast", "es_forecast")


class SchemaError(ValueError):
    """Input file does not have the expected shape."""


# --------------------------------------------------------------------------- input


def _parse_key(text: str, kind: str | None):
    text = text.strip()
    if kind in (None, "int"):
        try:
            return int(text), "int"
        except ValueError:
            if kind == "int":
                raise
    return dt.date.fromisoformat(text), "date"


def read_input(path: str | Path, need_es: bool) -> dict:
    """Read ``t, loss, var_forecast[, es_forecast, true_mu, true_sigma]`` rows.

    The key column holds integers or ISO dates, decided by the first row, and
    must be strictly increasing.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        rows = list(reader)
    required = ["t", "loss", "var_forecast"] + (["es_forecast"] if need_es else [])
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    if not rows:
        raise SchemaError("no data rows")
    keys, kind = [], None
    cols: dict[str, list[float]] = {c: [] for c in header if c != "t"}
    for i, row in enumerate(rows, start=1):
        row = {k.strip(): v for k, v in row.items() if k is not None}
        try:
            key, kind = _parse_key(row["t"], kind)
        except ValueError:
            raise InputError(f"row {i}: cannot read key {row['t']!r}") from None
        if keys and key <= keys[-1]:
            raise InputError(f"row {i}: key {row['t']!r} is not after the previous one")
        keys.append(key)
        for c in cols:
            val = (row.get(c) or "").strip()
            try:
                cols[c].append(float(val) if val else math.nan)
            except ValueError:
                raise InputError(f"row {i}: column {c} has non-numeric value {val!r}") from None
    out = {c: np.array(v) for c, v in cols.items()}
    bad = np.flatnonzero(np.isnan(out["loss"]))
    if bad.size:
        raise InputError(f"row {bad[0] + 1}: loss is missing or NaN")
    for c in required[2:]:
        bad = np.flatnonzero(np.isnan(out[c]))
        if bad.size:
            raise InputError(f"row {bad[0] + 1}: {c} is missing or NaN")
    out["key"] = [k.isoformat() if kind == "date" else k for k in keys]
    return out


# --------------------------------------------------------------------------- commands


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("EBACKTEST_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError("EBACKTEST_SEED", f"not an integer: {env!r}") from None


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args)
    path = simulate(cfg, seed)
    fc = forecast_stream(path, cfg)
    sl = path.test_slice
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(INPUT_COLUMNS + ("true_mu", "true_sigma"))
        for i, (x, v, s, m, sd) in enumerate(zip(path.losses[sl], fc.var, fc.es, path.mu[sl], path.sigma[sl]),
                                             start=1):
            w.writerow([i, repr(float(x)), repr(float(v)), repr(float(s)), repr(float(m)), repr(float(sd))])
    log.info("wrote %d rows to %s (seed %d)", len(fc), args.output, seed)
    return EXIT_OK


def _strategy(args, data) -> BettingStrategy:
    method = Method(args.method)
    kw = dict(gamma_cap=args.gamma, window=args.window)
    if args.warmup is not None:
        kw["warmup"] = args.warmup
    if method is Method.FIXED:
        return BettingStrategy(method, lam=args.lam, **kw)
    if method is Method.GRO:
        if "true_mu" not in data or "true_sigma" not in data:
            raise SchemaError("gro needs true_mu and true_sigma columns")
        alt = LocationScaleAlternative(special.ndtri, data["true_mu"], data["true_sigma"])
        return BettingStrategy(method, alternative=alt, **kw)
    return BettingStrategy(method, **kw)


def cmd_backtest(args) -> int:
    try:
        thresholds = DetectionThresholds.parse(args.thresholds)
    except ValueError as exc:
        raise ConfigError("thresholds", str(exc)) from None
    need_es = args.measure == "es"
    data = read_input(args.input, need_es)
    try:
        estat = EStatistic.es(args.p) if need_es else EStatistic.var(args.p)
        strategy = _strategy(args, data)
    except (ValueError, DomainError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise ConfigError("strategy", str(exc)) from None
    loss = data["loss"]
    r = data["es_forecast"] if need_es else data["var_forecast"]
    z = data["var_forecast"] if need_es else None
    keys = data["key"]
    traj, rep = backtest_arrays(loss, r, z, estat, strategy, thresholds, n_train=args.train,
                                t=np.array(keys, dtype=object))
    lam = traj.lam
    report = {
        "schema_version": SCHEMA_VERSION,
        "input": str(args.input),
        "measure": args.measure,
        "p": args.p,
        "method": strategy.method.value,
        "gamma_cap": strategy.gamma_cap,
        "window": strategy.window,
        "n_train": args.train,
        "n_days": rep.n_days,
        "n_inverted": int(np.sum(r < z)) if z is not None else 0,
        "detections": [
            {"threshold": thr, "day": day, "key": None if day is None else keys[args.train + day - 1]}
            for thr, day in zip(rep.thresholds, rep.crossings)
        ],
        "final_log_e": _json_num(rep.final_log_wealth),
        "max_log_e": _json_num(rep.max_log_wealth),
        "lambda": {
            "mean": float(lam.mean()),
            "min": float(lam.min()),
            "max": float(lam.max()),
            "positive_frac": float(np.mean(lam > 0)),
        },
    }
    text = json.dumps(report, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.trajectory:
        traj.write_csv(args.trajectory)
    if not math.isfinite(rep.final_log_wealth) and rep.final_log_wealth < 0:
        log.warning("e-process hit zero")
    return EXIT_OK


def _json_num(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def cmd_experiment(args) -> int:
    suite = args.suite
    if suite not in SUITES:
        raise ConfigError("suite", f"unknown suite {suite!r}; available: {', '.join(SUITES)}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = _seed(args)
    try:
        thresholds = DetectionThresholds.parse(args.thresholds)
    except ValueError as exc:
        raise ConfigError("thresholds", str(exc)) from None
    reps = args.reps
    if suite.startswith("stationary"):
        spec = stationary_spec(suite.split("-")[1], refit_interval=args.refit_interval)
        spec = type(spec)(spec.name, spec.scenario, spec.cells, spec.methods, thresholds)
        table = run_experiment(spec, reps or 200, seed, args.jobs)
        table.write_csv(out / f"{suite}.csv")
        table.write_json(out / f"{suite}.json")
    elif suite == "structural":
        st = structural_experiment(n_reps=reps or 500, base_seed=seed, jobs=args.jobs)
        st.write_csv(out / "structural.csv")
        st.write_json(out / "structural.json")
    elif suite == "gaming":
        g = gaming_experiment(n_reps=reps or 200, thresholds=thresholds, refit_interval=args.refit_interval,
                              base_seed=seed, jobs=args.jobs)
        _write_rows(out / "gaming.csv", g.rows())
        (out / "gaming.json").write_text(json.dumps(_clean(g.as_json()), indent=2), encoding="utf-8")
    elif suite == "type1":
        sizes = tuple(int(s) for s in args.sizes.split(","))
        rows = type1_experiment(sizes, n_reps=reps or 200, thresholds=thresholds, base_seed=seed, jobs=args.jobs)
        _write_rows(out / "type1.csv", rows)
        (out / "type1.json").write_text(
            json.dumps({"schema_version": SCHEMA_VERSION, "scenario": "type1", "rows": rows}, indent=2),
            encoding="utf-8")
    else:
        summary, traj_rows = [], []
        for case in ("a", "b", "c"):
            res = toy_experiment(case, n_reps=reps or 200, base_seed=seed, jobs=args.jobs)
            summary.extend(res.summary())
            for i in range(res.mean_paths["grem"].size):
                traj_rows.append(dict(case=case, t=i + 1, **{m: float(res.mean_paths[m][i]) for m in res.methods}))
        _write_rows(out / "example51.csv", summary)
        _write_rows(out / "example51_trajectories.csv", traj_rows)
        (out / "example51.json").write_text(
            json.dumps({"schema_version": SCHEMA_VERSION, "scenario": "example51", "rows": summary}, indent=2),
            encoding="utf-8")
    log.info("wrote %s results to %s", suite, out)
    return EXIT_OK


def _write_rows(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["empty"])
        w.writeheader()
        w.writerows(rows)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ebacktest", description="Sequential e-backtests of VaR and ES forecasts.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate a scenario and write losses, forecasts and true moments")
    sp.add_argument("config", help="key = value scenario file")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_simulate)

    bp = sub.add_parser("backtest", help="e-backtest a CSV of losses and forecasts")
    bp.add_argument("input")
    bp.add_argument("--measure", choices=("var", "es"), default="es")
    bp.add_argument("--p", type=float, default=0.975)
    bp.add_argument("--method", choices=[m.value for m in Method], default=Method.GREM.value)
    bp.add_argument("--gamma", type=float, default=0.5, help="cap on the betting fraction")
    bp.add_argument("--window", type=int, help="rolling window of past days used for betting")
    bp.add_argument("--warmup", type=int)
    bp.add_argument("--lambda", dest="lam", type=float, default=0.5, help="stake for --method fixed")
    bp.add_argument("--train", type=int, default=0, help="leading rows used only as betting history")
    bp.add_argument("--thresholds", default="2,5,10")
    bp.add_argument("--report", help="JSON report path (default: stdout)")
    bp.add_argument("--trajectory", help="CSV trajectory path")
    bp.set_defaults(func=cmd_backtest)

    ep = sub.add_parser("experiment", help=f"run a Monte-Carlo suite: {', '.join(SUITES)}")
    ep.add_argument("suite")
    ep.add_argument("--reps", type=int)
    ep.add_argument("--jobs", type=int, default=1)
    ep.add_argument("--seed", type=int)
    ep.add_argument("--thresholds", default="2,5,10")
    ep.add_argument("--refit-interval", type=int, default=10)
    ep.add_argument("--sizes", default="500,1000", help="sample sizes for the type1 suite")
    ep.add_argument("--out-dir", default="results")
    ep.set_defaults(func=cmd_experiment)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SchemaError, InputError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (FitError, ForecastError, StrategyError, FloatingPointError, DomainError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
