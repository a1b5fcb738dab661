"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion still reports its numbers.
"""

import math

import numpy as np
import pytest

from ebacktest.betting import BettingStrategy, Method, solve_log_growth
from ebacktest.eprocess import stopped_value
from ebacktest.estatistics import EStatistic, FiniteLaw
from ebacktest.harness import (
    backtest_arrays,
    gaming_experiment,
    run_experiment,
    stationary_spec,
    structural_experiment,
    toy_experiment,
)
from ebacktest.timeseries import Adjustment, Forecaster, ScenarioConfig, forecast_stream, rolling_fits, simulate


def _line(report_line, n, ok, text):
    report_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {text}")


# --------------------------------------------------------------------------- 1


def test_criterion_1_exact_identities(report_line):
    rng = np.random.default_rng(101)
    estat = EStatistic.es(0.9)
    worst = 0.0
    for _ in range(100):
        loss = rng.standard_t(4, 200)
        z = 1.2 + rng.uniform(-0.4, 0.4, 200)
        r = z + rng.uniform(0.05, 0.8, 200)
        traj, _ = backtest_arrays(loss, r, z, estat, BettingStrategy(Method.GREM))
        gree, _ = backtest_arrays(loss, r, z, estat, BettingStrategy(Method.GREE))
        grel, _ = backtest_arrays(loss, r, z, estat, BettingStrategy(Method.GREL))
        mix = 0.5 * (np.exp(gree.log_wealth) + np.exp(grel.log_wealth))
        worst = max(worst, float(np.max(np.abs(np.exp(traj.log_wealth) / mix - 1.0))))
    identity_ok = worst <= 1e-10

    loss = rng.standard_t(4, 300)
    a, _ = backtest_arrays(loss, np.full(300, 2.0), np.full(300, 1.5), estat, BettingStrategy(Method.GREE))
    b, _ = backtest_arrays(loss, np.full(300, 2.0), np.full(300, 1.5), estat, BettingStrategy(Method.GREL))
    equal_ok = np.array_equal(a.log_wealth, b.log_wealth) and np.array_equal(a.lam, b.lam)

    # mean statistic with a = 0 and r = 1 scores e = x, so x = 2 every day
    _, rep = backtest_arrays(np.full(10, 2.0), np.ones(10), None, EStatistic("mean"), BettingStrategy.fixed(0.5))
    fixed_ok = rep.crossings == (2, 4, 6)

    lam = solve_log_growth([0.0, 3.0])
    grid = np.linspace(0, 0.5, 500_001)
    oracle = grid[np.argmax(np.log(1 - grid) + np.log1p(2 * grid))]
    solve_ok = abs(lam - 0.25) <= 1e-5 and abs(lam - oracle) <= 1e-5

    ok = identity_ok and equal_ok and fixed_ok and solve_ok
    _line(report_line, 1, ok, f"mixture rel err {worst:.2e} (<=1e-10); constant-forecast legs equal {equal_ok}; "
                              f"fixed crossings {rep.crossings}; two-point lambda {lam:.8f} (grid {oracle:.6f})")
    assert ok


# --------------------------------------------------------------------------- 2


def _random_null(rng):
    k = int(rng.integers(2, 7))
    values = np.round(rng.normal(0, 1.5, k), 2)
    probs = rng.dirichlet(np.ones(k))
    p = float(rng.choice([0.8, 0.9, 0.95]))
    return FiniteLaw(values, probs), p


def test_criterion_2_null_validity(report_line):
    """Ville bound and optional stopping under randomized finite-support nulls."""
    rng = np.random.default_rng(202)
    n_nulls, runs, horizon, alpha = 20, 5000, 40, 0.1
    strat = BettingStrategy(Method.GREM)
    worst_p, worst_m, fails = -math.inf, -math.inf, []
    max_p, max_m = 0.0, 0.0
    for j in range(n_nulls):
        law, p = _random_null(rng)
        z_true, es_true = law.var(p), law.es(p)
        estat = EStatistic.es(p)
        hits = np.empty(runs, bool)
        stopped = np.empty(runs)
        for i in range(runs):
            loss = law.sample(rng, horizon)
            # forecasts: exact VaR and an ES report at or above the truth
            bump = rng.exponential(0.3, horizon) * (rng.random(horizon) < 0.5)
            r = np.maximum(es_true + bump, z_true)
            z = np.full(horizon, z_true)
            traj, _ = backtest_arrays(loss, r, z, estat, strat)
            lw = traj.log_wealth
            hits[i] = lw.max() >= -math.log(alpha)
            stopped[i] = stopped_value(lw, horizon, alpha)
        ph = hits.mean()
        se_p = math.sqrt(alpha * (1 - alpha) / runs)
        mm = stopped.mean()
        se_m = stopped.std(ddof=1) / math.sqrt(runs)
        max_p, max_m = max(max_p, ph), max(max_m, mm)
        worst_p = max(worst_p, (ph - alpha) / se_p)
        worst_m = max(worst_m, (mm - 1) / max(se_m, 1e-12))
        if ph > alpha + 3 * se_p or mm > 1 + 4 * se_m:
            fails.append((j, ph, mm))
    ok = not fails
    _line(report_line, 2, ok, f"{n_nulls} nulls x {runs} runs of {horizon} days: max P(sup>=10) {max_p:.4f}, "
                              f"max mean M_tau {max_m:.4f}; max (P-0.1)/SE {worst_p:.2f} (<=3), "
                              f"max (mean M_tau - 1)/SE {worst_m:.2f} (<=4); failures {fails}")
    assert ok


# --------------------------------------------------------------------------- 3


def test_criterion_3_true_exact_type1(report_line):
    spec = stationary_spec("es", forecasters=(Forecaster.TRUE,), adjustments=(Adjustment.EXACT,))
    tab = run_experiment(spec, 200, base_seed=0)
    pct = tab.detection_pct("true", "exact", "taylor-grem")
    target, tol = np.array([11.9, 1.7, 0.5]), np.array([5.0, 2.5, 1.5])
    ok = bool(np.all(np.abs(pct - target) <= tol))
    _line(report_line, 3, ok, f"true/exact detection % {pct.round(1).tolist()} vs {target.tolist()} "
                              f"+/- {tol.tolist()}")
    assert ok


# --------------------------------------------------------------------------- 4


@pytest.mark.slow
def test_criterion_4_fitted_forecasters(report_line):
    spec = stationary_spec("es", forecasters=(Forecaster.NORMAL, Forecaster.T, Forecaster.SKEWED_T,
                                              Forecaster.TRUE), refit_interval=10)
    tab = run_experiment(spec, 200, base_seed=0)
    normal = tab.detection_pct("normal", "exact", "taylor-grem")
    target = np.array([99.3, 95.7, 88.3])
    level_ok = bool(np.all(np.abs(normal - target) <= 8.0))
    order_fail = []
    for fc in ("normal", "t", "skewed-t", "true"):
        exact = tab.detection_pct(fc, "exact", "taylor-grem")
        lows = [tab.detection_pct(fc, a, "taylor-grem") for a in ("-10%es", "-10%both")]
        highs = [tab.detection_pct(fc, a, "taylor-grem") for a in ("+10%es", "+10%both")]
        if not all(np.all(lo >= exact) for lo in lows) or not all(np.all(exact >= hi) for hi in highs):
            order_fail.append(fc)
    ok = level_ok and not order_fail and tab.failures == 0
    _line(report_line, 4, ok, f"normal/exact detection % {normal.round(1).tolist()} vs {target.tolist()} +/- 8; "
                              f"ordering -10% >= exact >= +10% violated for {order_fail or 'none'}; "
                              f"failed reps {tab.failures}")
    assert ok


# --------------------------------------------------------------------------- 5


@pytest.mark.slow
def test_criterion_5_forecast_levels(report_line):
    true_cfg = ScenarioConfig.stationary(forecaster=Forecaster.TRUE)
    skew_cfg = ScenarioConfig.stationary(forecaster=Forecaster.SKEWED_T, refit_interval=10)
    sums = np.zeros(4)
    n = 50
    for seed in range(n):
        path = simulate(true_cfg, seed)
        fits = rolling_fits(path, skew_cfg)
        sums += [
            forecast_stream(path, true_cfg, p=0.99).var.mean(),
            forecast_stream(path, true_cfg, p=0.975).es.mean(),
            forecast_stream(path, skew_cfg, fits, p=0.99).var.mean(),
            forecast_stream(path, skew_cfg, fits, p=0.975).es.mean(),
        ]
    avg = sums / n
    target = np.array([1.271, 1.343, 1.281, 1.358])
    tol = np.array([0.05, 0.05, 0.10, 0.10])
    ok = bool(np.all(np.abs(avg - target) <= tol))
    _line(report_line, 5, ok, f"mean [true VaR.99, true ES.975, skewed-t VaR.99, skewed-t ES.975] = "
                              f"{avg.round(3).tolist()} vs {target.tolist()} +/- {tol.tolist()}")
    assert ok


# --------------------------------------------------------------------------- 6


@pytest.mark.slow
def test_criterion_6_gaming(report_line):
    g = gaming_experiment(n_reps=200, base_seed=0)
    row = g.rows()[0]
    pct, days = row["detection_pct"], row["days_after_switch"]
    ok = pct >= 95.0 and abs(days - 249) <= 80 and g.gree_mean_path_abs <= 0.3
    _line(report_line, 6, ok, f"threshold-2 detection {pct:.1f}% (>=95), days after switch {days:.1f} "
                              f"(249 +/- 80), GREE mean-path |log M| over the first {g.switch_day} days "
                              f"{g.gree_mean_path_abs:.3f} (<=0.3; per-rep mean |log M| {g.gree_abs_log_mean:.3f})")
    assert ok


# --------------------------------------------------------------------------- 7


@pytest.mark.slow
def test_criterion_7_structural(report_line):
    grid = (0, 100, 200, 250)
    st = structural_experiment(grid, n_reps=500, threshold=20.0, base_seed=0)
    notes, ok = [], st.failures == 0
    for m in ("gree", "grel", "grem"):
        det = {b: (st.crossings[(b, m)] >= 1).astype(float) for b in grid}
        pcts = [100 * det[b].mean() for b in grid]
        for b0, b1 in zip(grid, grid[1:]):
            # common random numbers across b*: use the paired difference
            d = det[b0] - det[b1]
            se = d.std(ddof=1) / math.sqrt(d.size)
            if not d.mean() > 3 * se:
                ok = False
                notes.append(f"{m} {b0}->{b1}: diff {100 * d.mean():.1f} <= 3SE {300 * se:.1f}")
        last = det[grid[-1]].mean()
        if last > 0.05 + 3 * math.sqrt(0.05 * 0.95 / det[grid[-1]].size):
            ok = False
            notes.append(f"{m} b*=250 {100 * last:.1f}% above 5% + 3SE")
        notes.append(f"{m} {np.round(pcts, 1).tolist()}")
    _line(report_line, 7, ok, "detection % at b* " + str(list(grid)) + ": " + "; ".join(notes))
    assert ok


# --------------------------------------------------------------------------- 8


@pytest.mark.slow
def test_criterion_8_toy_stream_orderings(report_line):
    notes, ok = [], True
    for case in ("a", "b", "c"):
        res = toy_experiment(case, n_reps=200, base_seed=0)
        f = res.finals
        hi, lo = ("gree", "grel") if case in ("a", "b") else ("grel", "gree")
        d = f[hi] - f[lo]
        se = d.std(ddof=1) / math.sqrt(d.size)
        order_ok = d.mean() >= 3 * se
        gap_ok = res.grem_gap_min >= -1e-12
        ok = ok and order_ok and gap_ok
        notes.append(f"({case}) {hi} {f[hi].mean():.2f} vs {lo} {f[lo].mean():.2f}, diff/SE {d.mean() / se:.1f} "
                     f"(>=3), min GREM gap {res.grem_gap_min:.1e}")
    _line(report_line, 8, ok, "; ".join(notes))
    assert ok
