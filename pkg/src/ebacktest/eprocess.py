"""
Wealth process ``M_t = prod_s (1 - lam_s + lam_s e_s)`` kept in log space.

Wealth 0 (log ``-inf``) is absorbing.  An infinite e-value staked with a
positive fraction sends the log wealth to ``+inf``, where it stays unless a
later factor is exactly 0.  Detections are read off the running supremum,
so a threshold counts as crossed on the first day ``sup_{s<=t} M_s`` reaches it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernels

__all__ = [
    "DEFAULT_LEVELS",
    "DetectionReport",
    "DetectionThresholds",
    "EProcessState",
    "first_crossings",
    "read_trajectory",
    "write_trajectory",
]

DEFAULT_LEVELS = (2.0, 5.0, 10.0)


@dataclass(frozen=True)
class DetectionThresholds:
    """Wealth levels to report; ``hard_stop`` freezes the process once reached."""

    levels: tuple[float, ...] = DEFAULT_LEVELS
    hard_stop: float | None = None

    def __post_init__(self) -> None:
        lv = tuple(float(x) for x in self.levels)
        if not lv:
            raise ValueError("at least one threshold is required")
        if any(x <= 1 for x in lv):
            raise ValueError(f"thresholds must exceed 1, got {lv}")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise ValueError(f"thresholds must be strictly increasing, got {lv}")
        if self.hard_stop is not None and self.hard_stop <= 1:
            raise ValueError("hard_stop must exceed 1")
        object.__setattr__(self, "levels", lv)

    @classmethod
    def parse(cls, text: str, hard_stop: float | None = None) -> "DetectionThresholds":
        return cls(tuple(float(s) for s in text.split(",") if s.strip()), hard_stop)

    @classmethod
    def ville(cls, alpha: float) -> "DetectionThresholds":
        """Single rejection level ``1/alpha``."""
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        return cls((1.0 / alpha,))

    @property
    def log_levels(self) -> np.ndarray:
        return np.log(np.asarray(self.levels))


@dataclass(frozen=True)
class DetectionReport:
    """First-crossing day per threshold (``None`` if never) and the final log wealth."""

    thresholds: tuple[float, ...]
    crossings: tuple[int | None, ...]
    final_log_wealth: float
    max_log_wealth: float
    n_days: int

    def crossing(self, level: float) -> int | None:
        return self.crossings[self.thresholds.index(float(level))]

    @property
    def detected(self) -> tuple[bool, ...]:
        return tuple(c is not None for c in self.crossings)

    def as_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "crossings": list(self.crossings),
            "final_log_wealth": _json_float(self.final_log_wealth),
            "max_log_wealth": _json_float(self.max_log_wealth),
            "n_days": self.n_days,
        }


def _json_float(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


@dataclass
class EProcessState:
    """Running state of one e-process.

    ``t`` counts processed days, so ``t = 0`` is the initial state ``M_0 = 1``.
    With ``keep_history`` the per-day ``(t, lam, e, log M_t, sup log M)`` rows
    are retained for export.
    """

    thresholds: DetectionThresholds = field(default_factory=DetectionThresholds)
    keep_history: bool = False
    t: int = 0
    log_wealth: float = 0.0
    running_sup_log: float = 0.0
    stopped: bool = False
    crossings: dict[float, int | None] = field(default_factory=dict)
    history: list[tuple[int, float, float, float, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for lv in self.thresholds.levels:
            self.crossings.setdefault(lv, None)
        if self.thresholds.hard_stop is not None:
            self.crossings.setdefault(self.thresholds.hard_stop, None)

    def update(self, e_value: float, lam: float) -> float:
        """Advance one day; returns the new log wealth.

        After a hard stop the state is frozen and further updates are ignored.
        """
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"betting fraction must lie in [0, 1], got {lam}")
        if e_value < 0 or math.isnan(e_value):
            raise ValueError(f"e-values must be nonnegative, got {e_value}")
        if self.stopped:
            return self.log_wealth
        self.t += 1
        self.log_wealth = float(_kernels.log_step(self.log_wealth, float(lam), float(e_value)))
        if self.log_wealth > self.running_sup_log:
            self.running_sup_log = self.log_wealth
        for lv, day in self.crossings.items():
            if day is None and self.running_sup_log >= math.log(lv):
                self.crossings[lv] = self.t
        if self.keep_history:
            self.history.append((self.t, float(lam), float(e_value), self.log_wealth, self.running_sup_log))
        hs = self.thresholds.hard_stop
        if hs is not None and self.crossings[hs] is not None:
            self.stopped = True
        return self.log_wealth

    @property
    def wealth(self) -> float:
        return math.exp(self.log_wealth) if self.log_wealth < 709.0 else math.inf

    def detect(self) -> DetectionReport:
        lv = self.thresholds.levels
        return DetectionReport(lv, tuple(self.crossings[x] for x in lv),
                               self.log_wealth, self.running_sup_log, self.t)

    def stopped_value(self, horizon: int, alpha: float) -> float:
        """``M_tau`` for ``tau = min(horizon, first t with M_t >= 1/alpha)``.

        Needs the trajectory, so the state must have been built with
        ``keep_history=True`` (or be at ``t = 0``).
        """
        if self.t == 0:
            return 1.0
        if not self.keep_history:
            raise RuntimeError("stopped_value needs keep_history=True")
        logs = np.array([row[3] for row in self.history])
        return stopped_value(logs, horizon, alpha)


def first_crossings(log_wealth: np.ndarray, levels: Sequence[float]) -> tuple[int | None, ...]:
    """1-based first day the running maximum of ``log_wealth`` reaches each level."""
    lw = np.asarray(log_wealth, float)
    if lw.size == 0:
        return tuple(None for _ in levels)
    sup = np.maximum.accumulate(lw)
    out = []
    for lv in levels:
        hit = np.flatnonzero(sup >= math.log(lv))
        out.append(int(hit[0]) + 1 if hit.size else None)
    return tuple(out)


def stopped_value(log_wealth: np.ndarray, horizon: int, alpha: float) -> float:
    """Wealth at ``min(horizon, first crossing of 1/alpha)`` for a log-wealth path."""
    lw = np.asarray(log_wealth, float)[: max(int(horizon), 0)]
    if lw.size == 0:
        return 1.0
    hit = np.flatnonzero(lw >= -math.log(alpha))
    idx = int(hit[0]) if hit.size else lw.size - 1
    return float(np.exp(lw[idx]))


def report_from_path(log_wealth: np.ndarray, thresholds: DetectionThresholds) -> DetectionReport:
    lw = np.asarray(log_wealth, float)
    return DetectionReport(
        thresholds.levels,
        first_crossings(lw, thresholds.levels),
        float(lw[-1]) if lw.size else 0.0,
        float(max(0.0, lw.max())) if lw.size else 0.0,
        int(lw.size),
    )


TRAJECTORY_COLUMNS = ("t", "lambda", "e", "log_wealth", "sup_log_wealth")


def write_trajectory(path: str | Path, t: Iterable, lam, e, log_wealth) -> None:
    """Write per-day rows ``t, lambda, e, log_wealth, sup_log_wealth`` as CSV."""
    lw = np.asarray(log_wealth, float)
    sup = np.maximum.accumulate(np.concatenate([[0.0], lw]))[1:] if lw.size else lw
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for row in zip(t, lam, e, lw, sup):
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def read_trajectory(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = {c: np.array([float(r[c]) for r in rows]) for c in TRAJECTORY_COLUMNS[1:]}
    out["t"] = np.array([r["t"] for r in rows])
    return out
