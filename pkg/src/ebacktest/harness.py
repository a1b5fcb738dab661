"""
Backtest runner and Monte-Carlo experiment drivers.

:func:`run_backtest` turns a record stream into an e-process trajectory and a
detection report.  The experiment drivers replicate whole scenarios with
seeds ``base_seed + r`` and reduce the replications in index order, so the
tables do not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import special

from . import _kernels
from .betting import (
    BettingState,
    BettingStrategy,
    LocationScaleAlternative,
    Method,
    gro_lambda,
)
from .eprocess import DetectionReport, DetectionThresholds, EProcessState, report_from_path, write_trajectory
from .estatistics import BacktestRecord, EStatistic, Kind
from .timeseries import (
    Adjustment,
    Forecaster,
    RollingFits,
    ScenarioConfig,
    adjust_report,
    forecast_stream,
    rolling_fits,
    simulate,
)

__all__ = [
    "AggregateTable",
    "BacktestRun",
    "ExperimentSpec",
    "InputError",
    "Trajectory",
    "backtest_arrays",
    "gaming_experiment",
    "run_backtest",
    "run_experiment",
    "stationary_spec",
    "structural_experiment",
    "toy_experiment",
    "type1_experiment",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
LOG2 = math.log(2.0)


class InputError(ValueError):
    """Malformed record stream."""


# --------------------------------------------------------------------------- single backtest


@dataclass(frozen=True)
class BacktestRun:
    """A record stream plus how to test it.

    The first ``n_train`` records only feed the betting history; the e-process
    starts on the record after them.
    """

    records: Sequence[BacktestRecord]
    estat: EStatistic
    strategy: BettingStrategy = field(default_factory=BettingStrategy)
    thresholds: DetectionThresholds = field(default_factory=DetectionThresholds)
    n_train: int = 0

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        recs = list(self.records)
        if not recs:
            raise InputError("no records")
        t = np.array([rec.t for rec in recs])
        if np.any(np.diff(t) != 1):
            bad = int(np.flatnonzero(np.diff(t) != 1)[0]) + 1
            raise InputError(f"record {bad} (t={t[bad]}) breaks the consecutive day sequence")
        loss = np.array([rec.loss for rec in recs], float)
        r = np.array([rec.r for rec in recs], float)
        if self.estat.needs_aux:
            if any(rec.z is None for rec in recs):
                raise InputError(f"{self.estat.kind.value} backtests need an auxiliary forecast on every record")
            z = np.array([rec.z for rec in recs], float)
        else:
            z = np.array([np.nan if rec.z is None else rec.z for rec in recs], float)
        return t, loss, r, z


@dataclass(frozen=True)
class Trajectory:
    """Per-day betting fractions, e-values and log wealth of the tested span.

    ``gree_log_wealth``/``grel_log_wealth`` are the two legs of a mixture
    rule (``None`` otherwise).
    """

    t: np.ndarray
    lam: np.ndarray
    e: np.ndarray
    log_wealth: np.ndarray
    gree_log_wealth: np.ndarray | None = None
    grel_log_wealth: np.ndarray | None = None

    def write_csv(self, path) -> None:
        write_trajectory(path, self.t, self.lam, self.e, self.log_wealth)


def _kernel_code(estat: EStatistic) -> int | None:
    if estat.mixture_h != 1.0 or estat.mixture_k:
        return None
    return {Kind.QUANTILE: _kernels.QUANTILE, Kind.ES: _kernels.ES,
            Kind.MEAN: _kernels.MEAN, Kind.VARIANCE: _kernels.VARIANCE}.get(estat.kind)


def _evalues(estat: EStatistic, code, loss, r, z):
    if code is not None:
        return _kernels.estat_array(code, float(estat.p or 0.5), float(estat.a), loss, r, z)
    return np.asarray(estat(loss, r, None if not estat.needs_aux else z), float)


def _legs(code, estat, strategy, loss, r, z, e):
    """Per-day GREE and GREL fractions on the full (training + test) span."""
    m = strategy.method
    want_e = m.base in ("gree", "grem")
    want_l = m.base in ("grel", "grem")
    window = strategy.window or 0
    if code is not None:
        return _kernels.empirical_lambdas(code, float(estat.p or 0.5), float(estat.a), loss, r, z, e,
                                          strategy.gamma_cap, window, strategy.warmup, m.taylor,
                                          want_e, want_l, 1e-10, 1e12)
    # generic e-statistics: stream through BettingState
    state = BettingState(strategy, estat)
    lam_e = np.zeros(loss.size)
    lam_l = np.zeros(loss.size)
    for t in range(loss.size):
        zt = z[t] if estat.needs_aux else None
        prop = state.propose(r[t], zt)
        lam_e[t], lam_l[t] = prop.lam_gree, prop.lam_grel
        if m.base == "gree":
            lam_e[t] = prop.lam
        elif m.base == "grel":
            lam_l[t] = prop.lam
        state.observe(loss[t], r[t], zt)
    return lam_e, lam_l


def backtest_arrays(loss, r, z, estat: EStatistic, strategy: BettingStrategy,
                    thresholds: DetectionThresholds | None = None, n_train: int = 0,
                    t=None) -> tuple[Trajectory, DetectionReport]:
    """Array form of :func:`run_backtest`."""
    thresholds = thresholds or DetectionThresholds()
    loss = np.ascontiguousarray(loss, dtype=float)
    r = np.ascontiguousarray(r, dtype=float)
    z = np.full(loss.size, np.nan) if z is None else np.ascontiguousarray(z, dtype=float)
    if not (loss.size == r.size == z.size):
        raise InputError("loss and forecast arrays differ in length")
    if np.isnan(loss).any():
        raise InputError(f"NaN loss at row {int(np.flatnonzero(np.isnan(loss))[0])}")
    if not 0 <= n_train < loss.size:
        raise InputError("n_train must leave at least one day to test")
    code = _kernel_code(estat)
    e = _evalues(estat, code, loss, r, z)
    m = strategy.method
    n = loss.size
    gree_lw = grel_lw = None
    if m is Method.FIXED:
        lam = np.full(n, strategy.lam)
        lam[: n_train + strategy.warmup] = 0.0
    elif m is Method.GRO:
        lam = _gro_path(code, estat, strategy, loss, r, z, n_train)
    else:
        lam_e, lam_l = _legs(code, estat, strategy, loss, r, z, e)
        lam_e[:n_train] = 0.0
        lam_l[:n_train] = 0.0
        if m.base == "gree":
            lam = lam_e
        elif m.base == "grel":
            lam = lam_l
        else:
            gree_lw = _kernels.accumulate_log_wealth(lam_e, e)
            grel_lw = _kernels.accumulate_log_wealth(lam_l, e)
            prev_e = np.concatenate([[0.0], gree_lw[:-1]])
            prev_l = np.concatenate([[0.0], grel_lw[:-1]])
            with np.errstate(invalid="ignore"):
                w = special.expit(prev_e - prev_l)
            w = np.where(np.isnan(w), 0.5, w)
            lam = w * lam_e + (1.0 - w) * lam_l
            both_dead = np.isneginf(prev_e) & np.isneginf(prev_l)
            lam = np.where(both_dead, 0.0, lam)
    sl = slice(n_train, n)
    lam_t, e_t = lam[sl], e[sl]
    if gree_lw is not None:
        gree_lw, grel_lw = gree_lw[sl], grel_lw[sl]
        log_w = np.logaddexp(gree_lw, grel_lw) - LOG2
    else:
        log_w = _kernels.accumulate_log_wealth(np.ascontiguousarray(lam_t), np.ascontiguousarray(e_t))
    if thresholds.hard_stop is not None:
        hit = np.flatnonzero(np.maximum.accumulate(log_w) >= math.log(thresholds.hard_stop))
        if hit.size:
            log_w = log_w.copy()
            log_w[hit[0] + 1:] = log_w[hit[0]]
    days = np.arange(1, n - n_train + 1) if t is None else np.asarray(t)[sl]
    traj = Trajectory(days, lam_t, e_t, log_w, gree_lw, grel_lw)
    return traj, report_from_path(log_w, thresholds)


def _gro_path(code, estat, strategy, loss, r, z, n_train):
    n = loss.size
    alt = strategy.alternative
    start = n_train + strategy.warmup
    if isinstance(alt, LocationScaleAlternative) and code is not None:
        nodes, weights = alt.nodes()
        loc = np.ascontiguousarray(alt.loc, dtype=float)
        scale = np.ascontiguousarray(alt.scale, dtype=float)
        return _kernels.gro_location_scale(code, float(estat.p or 0.5), float(estat.a), nodes, weights,
                                           loc, scale, r, z, strategy.gamma_cap, start, 1e-10, 1e12)
    lam = np.zeros(n)
    for i in range(start, n):
        zt = z[i] if estat.needs_aux else None
        lam[i] = gro_lambda(strategy.law_at(i + 1), estat, r[i], zt, strategy.gamma_cap)
    return lam


def run_backtest(run: BacktestRun, streaming: bool = False) -> tuple[Trajectory, DetectionReport]:
    """Run one e-backtest.

    The default path computes whole-span arrays with compiled kernels; with
    ``streaming=True`` the same result is built day by day from
    :class:`BettingState` and :class:`EProcessState`.
    """
    t, loss, r, z = run.arrays()
    if not streaming:
        return backtest_arrays(loss, r, z, run.estat, run.strategy, run.thresholds, run.n_train, t)
    return _run_streaming(run, t, loss, r, z)


def _run_streaming(run: BacktestRun, t, loss, r, z):
    estat, strategy = run.estat, run.strategy
    bet = BettingState(strategy, estat, run.n_train)
    proc = EProcessState(run.thresholds, keep_history=True)
    is_grem = strategy.method.base == "grem"
    legs_e, legs_l, lams, es = [], [], [], []
    lw_e = lw_l = 0.0
    for i in range(loss.size):
        zt = z[i] if estat.needs_aux else None
        prop = bet.propose(r[i], zt)
        e = bet.observe(loss[i], r[i], zt)
        if i < run.n_train:
            continue
        if is_grem:
            lw_e = _kernels.log_step(lw_e, prop.lam_gree, e)
            lw_l = _kernels.log_step(lw_l, prop.lam_grel, e)
            legs_e.append(lw_e)
            legs_l.append(lw_l)
        proc.update(e, prop.lam)
        lams.append(prop.lam)
        es.append(e)
    days = t[run.n_train:]
    if is_grem:
        log_w = np.logaddexp(np.array(legs_e), np.array(legs_l)) - LOG2
        traj = Trajectory(days, np.array(lams), np.array(es), log_w, np.array(legs_e), np.array(legs_l))
        return traj, report_from_path(log_w, run.thresholds)
    log_w = np.array([row[3] for row in proc.history])
    return Trajectory(days, np.array(lams), np.array(es), log_w), proc.detect()


# --------------------------------------------------------------------------- aggregation


@dataclass
class CellResult:
    """Raw per-replication outcomes of one table cell."""

    crossings: list[tuple[int | None, ...]] = field(default_factory=list)
    final_log: list[float] = field(default_factory=list)

    def add(self, report: DetectionReport) -> None:
        self.crossings.append(report.crossings)
        self.final_log.append(report.final_log_wealth)

    def crossing_matrix(self) -> np.ndarray:
        """Replications x thresholds, ``-1`` where never crossed."""
        return np.array([[-1 if c is None else c for c in row] for row in self.crossings], dtype=int)


@dataclass
class AggregateTable:
    """Cross-replication summary keyed by ``(forecaster, adjustment, method)``.

    ``rows`` carries one entry per threshold with the detection percentage,
    the mean detection day over detecting replications and the mean final
    log wealth.  A report with ``r < z`` yields an infinite e-value, and a
    positive stake then makes the log wealth ``+inf`` for good; such
    replications are counted in ``n_infinite_final`` and left out of the mean.
    """

    scenario: str
    thresholds: tuple[float, ...]
    cells: dict[tuple[str, str, str], CellResult]
    n_reps: int
    failures: int = 0
    errors: list[str] = field(default_factory=list)
    day_offset: int = 0

    def rows(self) -> list[dict]:
        out = []
        for (fc, adj, method), cell in self.cells.items():
            cm = cell.crossing_matrix()
            finals = np.array(cell.final_log, float)
            finite = finals[np.isfinite(finals)]
            for j, thr in enumerate(self.thresholds):
                col = cm[:, j] if cm.size else np.empty(0, int)
                hit = col[col > self.day_offset] - self.day_offset
                out.append(dict(
                    scenario=self.scenario, forecaster=fc, adjustment=adj, method=method, threshold=thr,
                    detection_pct=100.0 * float(np.mean(col >= 1)) if col.size else math.nan,
                    mean_days=float(hit.mean()) if hit.size else math.nan,
                    mean_final_log_e=float(finite.mean()) if finite.size else math.nan,
                    n_infinite_final=int(finals.size - finite.size),
                    n_ok=int(col.size), n_failed=self.failures,
                ))
        return out

    def cell(self, forecaster: str, adjustment: str, method: str) -> CellResult:
        return self.cells[(forecaster, adjustment, method)]

    def detection_pct(self, forecaster: str, adjustment: str, method: str) -> np.ndarray:
        cm = self.cell(forecaster, adjustment, method).crossing_matrix()
        return 100.0 * (cm >= 1).mean(axis=0)

    def write_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["scenario"])
            w.writeheader()
            w.writerows(rows)

    def as_json(self) -> dict:
        nested: dict = {}
        for row in self.rows():
            leaf = nested.setdefault(row["forecaster"], {}).setdefault(row["adjustment"], {}) \
                .setdefault(row["method"], {})
            leaf[str(row["threshold"])] = {k: _finite(row[k]) for k in ("detection_pct", "mean_days", "mean_final_log_e")}
        return {"schema_version": SCHEMA_VERSION, "scenario": self.scenario, "n_reps": self.n_reps,
                "failures": self.failures, "thresholds": list(self.thresholds), "table": nested}

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_json(), indent=2), encoding="utf-8")


def _finite(x):
    return None if isinstance(x, float) and not math.isfinite(x) else x


# --------------------------------------------------------------------------- experiments


@dataclass(frozen=True)
class ExperimentSpec:
    """A scenario, the forecast cells to evaluate on each path and the betting rules."""

    name: str
    scenario: ScenarioConfig
    cells: tuple[tuple[Forecaster, Adjustment], ...]
    methods: tuple[BettingStrategy, ...] = (BettingStrategy(Method.TAYLOR_GREM),)
    thresholds: DetectionThresholds = field(default_factory=DetectionThresholds)

    def estat(self) -> EStatistic:
        sc = self.scenario
        return EStatistic.var(sc.p) if sc.measure == "var" else EStatistic.es(sc.p)


def _replicate(spec: ExperimentSpec, seed: int):
    """One replication: {(forecaster, adjustment, method): DetectionReport}."""
    sc = spec.scenario
    path = simulate(sc, seed)
    estat = spec.estat()
    loss = path.losses[path.test_slice]
    fits: RollingFits | None = None
    base: dict[Forecaster, object] = {}
    out = {}
    for fc, adj in spec.cells:
        cfg = replace(sc, forecaster=fc, adjustment=adj)
        parametric = fc in (Forecaster.NORMAL, Forecaster.T, Forecaster.SKEWED_T) or adj is Adjustment.GAMED
        if parametric and fits is None:
            fits = rolling_fits(path, sc)
        if adj is Adjustment.GAMED:
            fcst = forecast_stream(path, cfg, fits)
        else:
            if fc not in base:
                base[fc] = forecast_stream(path, replace(cfg, adjustment=Adjustment.EXACT), fits)
            fcst = adjust_report(base[fc], adj)
        r, z = fcst.report(sc.measure)
        for strat in spec.methods:
            _, rep = backtest_arrays(loss, r, z, estat, strat, spec.thresholds)
            out[(fc.value, adj.value, strat.method.value)] = rep
    return out


def _safe(fn, args):
    try:
        return fn(*args), None
    except Exception as exc:  # a failed replication is recorded, not fatal
        log.warning("replication %s failed: %s", args[-1], exc)
        return None, f"{type(exc).__name__}: {exc}"


def _star_safe(packed):
    fn, args = packed
    return _safe(fn, args)


def map_replications(fn: Callable, arg_list: Sequence[tuple], jobs: int = 1) -> list:
    """Evaluate ``fn(*args)`` for each args tuple, preserving order; failures give ``(None, msg)``."""
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(arg_list) <= 1:
        return [_safe(fn, a) for a in arg_list]
    chunk = max(1, len(arg_list) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_star_safe, [(fn, a) for a in arg_list], chunksize=chunk))


def run_experiment(spec: ExperimentSpec, n_reps: int, base_seed: int = 0, jobs: int = 1) -> AggregateTable:
    """Replicate ``spec`` with seeds ``base_seed + r`` and aggregate in replication order."""
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    results = map_replications(_replicate, [(spec, base_seed + r) for r in range(n_reps)], jobs)
    cells: dict[tuple[str, str, str], CellResult] = {}
    for fc, adj in spec.cells:
        for strat in spec.methods:
            cells[(fc.value, adj.value, strat.method.value)] = CellResult()
    failures, errors = 0, []
    for res, err in results:
        if res is None:
            failures += 1
            errors.append(err)
            continue
        for key, rep in res.items():
            cells[key].add(rep)
    return AggregateTable(spec.name, spec.thresholds.levels, cells, n_reps, failures, errors)


_ES_ADJ = (Adjustment.MINUS_ES, Adjustment.MINUS_BOTH, Adjustment.EXACT, Adjustment.PLUS_BOTH, Adjustment.PLUS_ES)
_VAR_ADJ = (Adjustment.MINUS_VAR, Adjustment.EXACT, Adjustment.PLUS_VAR)
_ALL_FC = (Forecaster.NORMAL, Forecaster.T, Forecaster.SKEWED_T, Forecaster.TRUE)


def stationary_spec(measure: str = "es", forecasters: Iterable[Forecaster] = _ALL_FC,
                    adjustments: Iterable[Adjustment] | None = None, refit_interval: int = 10,
                    methods: Sequence[BettingStrategy] = (BettingStrategy(Method.TAYLOR_GREM),),
                    **scenario_kw) -> ExperimentSpec:
    """Stationary AR-GARCH design: VaR_0.99 (``measure="var"``) or ES_0.975 reports over 500 days."""
    p = 0.99 if measure == "var" else 0.975
    if adjustments is None:
        adjustments = _VAR_ADJ if measure == "var" else _ES_ADJ
    sc = ScenarioConfig.stationary(p=p, measure=measure, refit_interval=refit_interval, **scenario_kw)
    cells = tuple((Forecaster(f), Adjustment(a)) for f in forecasters for a in adjustments)
    return ExperimentSpec(f"stationary-{measure}", sc, cells, tuple(methods))


# --------------------------------------------------------------------------- structural change


@dataclass
class StructuralTable:
    """Detection percentage and average run length per change day and rule."""

    threshold: float
    rows: list[dict]
    crossings: dict[tuple[int, str], np.ndarray]
    n_reps: int
    failures: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(self.rows[0]))
            w.writeheader()
            w.writerows(self.rows)

    def as_json(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "scenario": "structural", "threshold": self.threshold,
                "n_reps": self.n_reps, "failures": self.failures,
                "rows": [{k: _finite(v) for k, v in row.items()} for row in self.rows]}

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_json(), indent=2), encoding="utf-8")

    def pct(self, b_star: int, method: str) -> float:
        c = self.crossings[(b_star, method)]
        return 100.0 * float(np.mean(c >= 1))


def _structural_rep(b_grid, methods, measure, threshold, seed):
    out = {}
    estat = EStatistic.var(0.95) if measure == "var" else EStatistic.es(0.95)
    thr = DetectionThresholds((threshold,))
    for b in b_grid:
        sc = ScenarioConfig.structural(b_star=b, measure=measure)
        path = simulate(sc, seed)
        fc = forecast_stream(path, sc)
        r, z = fc.report(measure)
        loss = path.losses[path.test_slice]
        for strat in methods:
            _, rep = backtest_arrays(loss, r, z, estat, strat, thr)
            out[(b, strat.method.value)] = -1 if rep.crossings[0] is None else rep.crossings[0]
    return out


def structural_experiment(b_grid: Sequence[int] = (0, 100, 200, 250), n_reps: int = 500,
                          threshold: float = 20.0, measure: str = "es",
                          methods: Sequence[BettingStrategy] = (BettingStrategy(Method.GREE),
                                                                BettingStrategy(Method.GREL),
                                                                BettingStrategy(Method.GREM)),
                          base_seed: int = 0, jobs: int = 1) -> StructuralTable:
    """Structural-change design at level 0.95.

    Replication ``r`` reuses seed ``base_seed + r`` for every change day, so
    the innovations are common across the grid.  The run length counts days
    from the change to detection, over replications detecting after the change.
    """
    args = [(tuple(b_grid), tuple(methods), measure, threshold, base_seed + r) for r in range(n_reps)]
    results = map_replications(_structural_rep, args, jobs)
    ok = [res for res, _ in results if res is not None]
    failures = len(results) - len(ok)
    crossings = {}
    rows = []
    for b in b_grid:
        for strat in methods:
            key = (b, strat.method.value)
            c = np.array([res[key] for res in ok], dtype=int)
            crossings[key] = c
            after = c[c > b] - b
            rows.append(dict(b_star=b, method=strat.method.value, threshold=threshold,
                             detection_pct=100.0 * float(np.mean(c >= 1)) if c.size else math.nan,
                             arl=float(after.mean()) if after.size else math.nan,
                             n_post_detections=int(after.size), n_ok=int(c.size)))
    return StructuralTable(threshold, rows, crossings, n_reps, failures)


# --------------------------------------------------------------------------- gaming


@dataclass
class GamingSummary:
    table: AggregateTable
    switch_day: int
    gree_abs_log_mean: float
    gree_log_mean: float
    gree_mean_path_abs: float
    grel_log_min_mean: float
    mean_log_path: np.ndarray
    mean_gree_path: np.ndarray
    mean_grel_path: np.ndarray

    def rows(self) -> list[dict]:
        rows = self.table.rows()
        for row in rows:
            row["days_after_switch"] = row.pop("mean_days")
        return rows

    def as_json(self) -> dict:
        out = self.table.as_json()
        out.update(switch_day=self.switch_day, gree_abs_log_mean=self.gree_abs_log_mean,
                   gree_log_mean=self.gree_log_mean, gree_mean_path_abs=self.gree_mean_path_abs,
                   grel_log_min_mean=self.grel_log_min_mean)
        return out


def _gaming_rep(sc: ScenarioConfig, strategy: BettingStrategy, thresholds, seed):
    path = simulate(sc, seed)
    fits = rolling_fits(path, sc)
    fcst = forecast_stream(path, sc, fits)
    r, z = fcst.report(sc.measure)
    estat = EStatistic.var(sc.p) if sc.measure == "var" else EStatistic.es(sc.p)
    traj, rep = backtest_arrays(path.losses[path.test_slice], r, z, estat, strategy, thresholds)
    return rep, traj.log_wealth, traj.gree_log_wealth, traj.grel_log_wealth


def gaming_experiment(n_reps: int = 200, measure: str = "es", switch_day: int = 1000, n_test: int = 2000,
                      window: int = 500, refit_interval: int = 10, thresholds: DetectionThresholds | None = None,
                      method: Method = Method.TAYLOR_GREM, base_seed: int = 0, jobs: int = 1) -> GamingSummary:
    """Conservative reports (skewed-t fits, +10%) until ``switch_day``, normal fits after.

    Detection days are counted after the switch and averaged over
    replications crossing after it.
    """
    thresholds = thresholds or DetectionThresholds()
    p = 0.99 if measure == "var" else 0.975
    sc = ScenarioConfig.gamed(switch_day=switch_day, n_test=n_test, p=p, measure=measure,
                              refit_interval=refit_interval)
    strategy = BettingStrategy(method, window=window)
    results = map_replications(_gaming_rep, [(sc, strategy, thresholds, base_seed + r) for r in range(n_reps)], jobs)
    cell = CellResult()
    paths, gree, grel, errors = [], [], [], []
    for res, err in results:
        if res is None:
            errors.append(err)
            continue
        rep, lw, ge, gl = res
        cell.add(rep)
        paths.append(lw)
        gree.append(ge)
        grel.append(gl)
    key = (Forecaster.NORMAL.value, Adjustment.GAMED.value, method.value)
    table = AggregateTable("gaming", thresholds.levels, {key: cell}, n_reps, len(errors), errors,
                           day_offset=switch_day)
    ge = np.array(gree)
    gl = np.array(grel)
    pre = slice(0, switch_day)
    have_legs = ge.ndim == 2 and ge.size > 0
    return GamingSummary(
        table, switch_day,
        gree_abs_log_mean=float(np.abs(ge[:, pre]).mean()) if have_legs else math.nan,
        gree_log_mean=float(ge[:, pre].mean()) if have_legs else math.nan,
        gree_mean_path_abs=float(np.abs(ge[:, pre].mean(axis=0)).mean()) if have_legs else math.nan,
        grel_log_min_mean=float(gl[:, pre].min(axis=1).mean()) if have_legs else math.nan,
        mean_log_path=np.mean(paths, axis=0) if paths else np.empty(0),
        mean_gree_path=ge.mean(axis=0) if have_legs else np.empty(0),
        mean_grel_path=gl.mean(axis=0) if have_legs else np.empty(0),
    )


# --------------------------------------------------------------------------- type-I error


def _type1_rep(sc: ScenarioConfig, methods, thresholds, seed):
    path = simulate(sc, seed)
    fc = forecast_stream(path, sc)
    r, z = fc.report(sc.measure)
    estat = EStatistic.var(sc.p) if sc.measure == "var" else EStatistic.es(sc.p)
    loss = path.losses[path.test_slice]
    out = {}
    for strat in methods:
        traj, _ = backtest_arrays(loss, r, z, estat, strat, thresholds)
        out[strat.method.value] = np.maximum.accumulate(traj.log_wealth)
    return out


def type1_experiment(sizes: Sequence[int] = (500, 1000), n_reps: int = 200, measure: str = "es",
                     methods: Sequence[BettingStrategy] = (BettingStrategy(Method.TAYLOR_GREE),
                                                           BettingStrategy(Method.TAYLOR_GREL),
                                                           BettingStrategy(Method.TAYLOR_GREM)),
                     thresholds: DetectionThresholds | None = None,
                     base_seed: int = 0, jobs: int = 1) -> list[dict]:
    """Rejection rates of exact true-model reports by sample size.

    Each replication is simulated once at the largest size; a size ``n``
    counts a rejection when the running maximum crosses within ``n`` days.
    """
    thresholds = thresholds or DetectionThresholds()
    p = 0.99 if measure == "var" else 0.975
    sc = ScenarioConfig.stationary(n_test=max(sizes), p=p, measure=measure, forecaster=Forecaster.TRUE)
    results = map_replications(_type1_rep, [(sc, tuple(methods), thresholds, base_seed + r) for r in range(n_reps)],
                               jobs)
    ok = [res for res, _ in results if res is not None]
    rows = []
    for strat in methods:
        name = strat.method.value
        sups = np.array([res[name] for res in ok])
        for n in sizes:
            for thr in thresholds.levels:
                hit = (sups[:, n - 1] >= math.log(thr)) if sups.size else np.empty(0, bool)
                rows.append(dict(size=n, method=name, threshold=thr,
                                 rejection_pct=100.0 * float(hit.mean()) if hit.size else math.nan,
                                 n_ok=len(ok), n_failed=len(results) - len(ok)))
    return rows


# --------------------------------------------------------------------------- example streams


TOY_LEVEL = 0.95


def toy_stream(case: str, seed: int, n: int = 1000, n_train: int = 10):
    """Losses, (ES, VaR) reports and the true scale for the three toy designs.

    (a) scale grows linearly; (b) scale follows ``1 + sin(0.01 t)``; in both
    the reports are the scale times 1.86 (ES) and 1.48 (VaR).
    (c) iid standard normal losses with reports ``2.06 + eps``/``1.64 + eps``
    and ``eps`` uniform on ``{-0.5, -0.4, ..., 0.5}``.
    """
    rng = np.random.default_rng(seed)
    total = n + n_train
    t = np.arange(1, total + 1)
    z_innov = rng.standard_normal(total)
    if case == "a":
        scale = 1.0 + t / total
    elif case == "b":
        scale = 1.0 + np.sin(0.01 * t)
    elif case == "c":
        scale = np.ones(total)
    else:
        raise ValueError(f"unknown case {case!r}; expected a, b or c")
    loss = scale * z_innov
    if case == "c":
        eps = rng.choice(np.arange(-5, 6) / 10.0, size=total)
        r, z = 2.06 + eps, 1.64 + eps
    else:
        r, z = 1.86 * scale, 1.48 * scale
    return loss, r, z, scale


@dataclass
class ToyResult:
    case: str
    methods: tuple[str, ...]
    mean_paths: dict[str, np.ndarray]
    finals: dict[str, np.ndarray]
    grem_gap_min: float

    def summary(self) -> list[dict]:
        out = []
        for m in self.methods:
            f = self.finals[m]
            out.append(dict(case=self.case, method=m, mean_final_log_e=float(f.mean()),
                            se=float(f.std(ddof=1) / math.sqrt(f.size)) if f.size > 1 else math.nan))
        return out


def _toy_rep(case, n, n_train, gamma, seed):
    loss, r, z, scale = toy_stream(case, seed, n, n_train)
    estat = EStatistic.es(TOY_LEVEL)
    out = {}
    alt = LocationScaleAlternative(special.ndtri, np.zeros_like(scale), scale)
    for method in (Method.GRO, Method.GREE, Method.GREL, Method.GREM):
        strat = BettingStrategy(method, gamma_cap=gamma, alternative=alt if method is Method.GRO else None)
        traj, _ = backtest_arrays(loss, r, z, estat, strat, n_train=n_train)
        out[method.value] = traj.log_wealth
    return out


def toy_experiment(case: str, n_reps: int = 200, n: int = 1000, n_train: int = 10, gamma_cap: float = 0.5,
              base_seed: int = 0, jobs: int = 1) -> ToyResult:
    """Average log wealth of GRO, GREE, GREL and GREM on one toy design."""
    results = map_replications(_toy_rep, [(case, n, n_train, gamma_cap, base_seed + r) for r in range(n_reps)],
                               jobs)
    ok = [res for res, _ in results if res is not None]
    methods = tuple(m.value for m in (Method.GRO, Method.GREE, Method.GREL, Method.GREM))
    paths = {m: np.array([res[m] for res in ok]) for m in methods}
    gap = paths["grem"] - (np.maximum(paths["gree"], paths["grel"]) - LOG2)
    return ToyResult(case, methods, {m: paths[m].mean(axis=0) for m in methods},
                           {m: paths[m][:, -1] for m in methods}, float(gap.min()))
