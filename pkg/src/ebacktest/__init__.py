"""Sequential backtests of VaR and ES forecasts with e-processes."""

from .betting import BettingState, BettingStrategy, Method, solve_log_growth
from .distributions import Family, InnovationSpec
from .eprocess import DetectionReport, DetectionThresholds, EProcessState
from .estatistics import BacktestRecord, EStatistic, FiniteLaw, Kind
from .harness import (
    AggregateTable,
    BacktestRun,
    backtest_arrays,
    run_backtest,
    run_experiment,
    structural_experiment,
)
from .timeseries import Adjustment, Forecaster, ScenarioConfig, simulate

__version__ = "0.1.0"

__all__ = [
    "AggregateTable",
    "Adjustment",
    "BacktestRecord",
    "BacktestRun",
    "BettingState",
    "BettingStrategy",
    "DetectionReport",
    "DetectionThresholds",
    "EProcessState",
    "EStatistic",
    "Family",
    "FiniteLaw",
    "Forecaster",
    "InnovationSpec",
    "Kind",
    "Method",
    "ScenarioConfig",
    "backtest_arrays",
    "run_backtest",
    "run_experiment",
    "simulate",
    "solve_log_growth",
    "structural_experiment",
]
