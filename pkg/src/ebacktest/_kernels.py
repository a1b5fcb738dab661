"""Compiled inner loops shared by the betting, e-process and harness modules."""

import math

import numpy as np
from numba import njit

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

# e-statistic codes understood by estat_value
QUANTILE = 0
ES = 1
MEAN = 2
VARIANCE = 3


@njit(cache=True)
def _ratio(num, den):
    if den == 0.0:
        return 1.0 if num == 0.0 else np.inf
    return num / den


@njit(cache=True)
def estat_value(code, x, r, z, p, a):
    if code == QUANTILE:
        return 1.0 / (1.0 - p) if x > r else 0.0
    if code == ES:
        if r < z:
            return np.inf
        if z == np.inf:
            return 0.0
        return _ratio(max(x - z, 0.0), (1.0 - p) * (r - z))
    if code == MEAN:
        return _ratio(x - a, r - a)
    return _ratio((x - z) * (x - z), r)


@njit(cache=True)
def _objective(values, weights, lam, cap):
    total = 0.0
    n = values.shape[0]
    uniform = weights.shape[0] == 0
    for i in range(n):
        w = 1.0 / n if uniform else weights[i]
        if w == 0.0:
            continue
        v = min(values[i], cap)
        total += w * math.log1p(lam * (v - 1.0))
    return total


@njit(cache=True)
def _slope(values, weights, lam, cap):
    total = 0.0
    n = values.shape[0]
    uniform = weights.shape[0] == 0
    for i in range(n):
        w = 1.0 / n if uniform else weights[i]
        if w == 0.0:
            continue
        v = min(values[i], cap)
        total += w * (v - 1.0) / (1.0 + lam * (v - 1.0))
    return total


@njit(cache=True)
def solve_log_growth(values, weights, gamma, tol, cap):
    """argmax over [0, gamma] of sum_i w_i log(1 - lam + lam v_i).

    Empty ``weights`` means uniform weights.
    """
    n = values.shape[0]
    uniform = weights.shape[0] == 0
    has_inf = False
    has_zero = False
    mean = 0.0
    for i in range(n):
        w = 1.0 / n if uniform else weights[i]
        if w <= 0.0:
            continue
        v = values[i]
        if v == np.inf:
            has_inf = True
        elif v == 0.0:
            has_zero = True
        mean += w * min(v, cap)
    if has_inf and not has_zero:
        return gamma
    if mean <= 1.0:
        return 0.0
    # concave objective: still rising at the cap means the cap is optimal
    if _slope(values, weights, gamma, cap) >= 0.0:
        return gamma
    a = 0.0
    b = gamma
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = _objective(values, weights, c, cap)
    fd = _objective(values, weights, d, cap)
    while b - a > tol:
        if fc >= fd:
            b = d
            d = c
            fd = fc
            c = b - INV_PHI * (b - a)
            fc = _objective(values, weights, c, cap)
        else:
            a = c
            c = d
            fc = fd
            d = a + INV_PHI * (b - a)
            fd = _objective(values, weights, d, cap)
    return 0.5 * (a + b)


@njit(cache=True)
def taylor_generic(values, gamma, cap):
    """0 v ((sum e - n) / sum (e - 1)^2) ^ gamma."""
    num = 0.0
    den = 0.0
    for i in range(values.shape[0]):
        v = min(values[i], cap)
        num += v - 1.0
        den += (v - 1.0) * (v - 1.0)
    if den == 0.0:
        return 0.0 if num <= 0.0 else gamma
    lam = num / den
    if lam < 0.0:
        return 0.0
    return min(lam, gamma)


@njit(cache=True)
def empirical_lambdas(code, p, a, loss, r, z, evals, gamma, window, warmup,
                      taylor, want_gree, want_grel, tol, cap):
    """Betting fractions of the GREE and GREL rules for every day.

    Day ``t`` (0-based) sees history ``max(0, t - window) .. t - 1``;
    ``window <= 0`` means the whole past.
    """
    n = loss.shape[0]
    lam_e = np.zeros(n)
    lam_l = np.zeros(n)
    buf = np.empty(n)
    no_weights = np.empty(0)
    for t in range(n):
        if t < warmup:
            continue
        lo = 0 if window <= 0 else max(0, t - window)
        m = t - lo
        if m == 0:
            continue
        if want_gree:
            hist = evals[lo:t]
            if taylor:
                lam_e[t] = taylor_generic(hist, gamma, cap)
            else:
                lam_e[t] = solve_log_growth(hist, no_weights, gamma, tol, cap)
        if want_grel:
            for s in range(lo, t):
                buf[s - lo] = estat_value(code, loss[s], r[t], z[t], p, a)
            hist = buf[:m]
            if taylor:
                lam_l[t] = taylor_generic(hist, gamma, cap)
            else:
                lam_l[t] = solve_log_growth(hist, no_weights, gamma, tol, cap)
    return lam_e, lam_l


@njit(cache=True)
def log_factor(lam, e):
    if lam == 0.0:
        return 0.0
    if e == np.inf:
        return np.inf
    y = lam * (e - 1.0)
    if y <= -1.0:
        return -np.inf
    return math.log1p(y)


@njit(cache=True)
def log_step(log_wealth, lam, e):
    if log_wealth == -np.inf:
        return -np.inf
    f = log_factor(lam, e)
    if f == -np.inf:
        return -np.inf
    if log_wealth == np.inf:
        return np.inf
    return log_wealth + f


@njit(cache=True)
def accumulate_log_wealth(lam, e):
    n = lam.shape[0]
    out = np.empty(n)
    lw = 0.0
    for t in range(n):
        lw = log_step(lw, lam[t], e[t])
        out[t] = lw
    return out


@njit(cache=True)
def estat_array(code, p, a, loss, r, z):
    n = loss.shape[0]
    out = np.empty(n)
    for t in range(n):
        out[t] = estat_value(code, loss[t], r[t], z[t], p, a)
    return out


@njit(cache=True)
def gro_location_scale(code, p, a, nodes, weights, loc, scale, r, z, gamma, warmup, tol, cap):
    """GRO fractions when day t's loss is ``loc[t] + scale[t] * X`` and ``X``
    has quantile values ``nodes`` with quadrature ``weights``."""
    n = loc.shape[0]
    lam = np.zeros(n)
    vals = np.empty(nodes.shape[0])
    for t in range(warmup, n):
        for i in range(nodes.shape[0]):
            vals[i] = estat_value(code, loc[t] + scale[t] * nodes[i], r[t], z[t], p, a)
        lam[t] = solve_log_growth(vals, weights, gamma, tol, cap)
    return lam
