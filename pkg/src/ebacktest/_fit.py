"""Compiled likelihoods and a Nelder-Mead simplex search for the time-series fits."""

import math

import numpy as np
from numba import njit

# objective codes
QML_AR1 = 0
QML_ZERO = 1
NLL_T = 2
NLL_SKEWT = 3

BIG = 1e100
NU_MAX = 500.0


@njit(cache=True)
def unpack_garch(theta, code):
    """Unconstrained vector -> (c, psi, alpha0, alpha1, beta)."""
    if code == QML_AR1:
        c = theta[0]
        psi = math.tanh(theta[1])
        k = 2
    else:
        c = 0.0
        psi = 0.0
        k = 0
    alpha0 = math.exp(theta[k])
    ea = math.exp(min(theta[k + 1], 50.0))
    eb = math.exp(min(theta[k + 2], 50.0))
    den = 1.0 + ea + eb
    return c, psi, alpha0, ea / den, eb / den


@njit(cache=True)
def garch_filter(c, psi, alpha0, alpha1, beta, x, prev):
    """Conditional means and variances along ``x``.

    Returns arrays of length ``n + 1``; entry ``n`` is the one-step-ahead
    forecast for the day after the window.  ``prev`` is the loss preceding
    ``x[0]`` (NaN if unknown, in which case the unconditional mean is used).
    The variance starts at its unconditional level.
    """
    n = x.shape[0]
    mu = np.empty(n + 1)
    s2 = np.empty(n + 1)
    persist = alpha1 + beta
    if persist < 1.0:
        s2[0] = alpha0 / (1.0 - persist)
    else:
        # non-stationary parameters: fall back to the sample variance
        m = 0.0
        for i in range(n):
            m += x[i]
        m /= max(n, 1)
        v = 0.0
        for i in range(n):
            v += (x[i] - m) ** 2
        s2[0] = v / max(n, 1)
    if math.isnan(prev):
        mu[0] = c / (1.0 - psi) if abs(psi) < 1.0 else c
    else:
        mu[0] = c + psi * prev
    for t in range(n):
        eps = x[t] - mu[t]
        mu[t + 1] = c + psi * x[t]
        s2[t + 1] = alpha0 + alpha1 * eps * eps + beta * s2[t]
    return mu, s2


@njit(cache=True)
def qml_nll(theta, code, x):
    c, psi, a0, a1, b = unpack_garch(theta, code)
    if code == QML_AR1:
        # condition on the first observation
        y = x[1:]
        mu, s2 = garch_filter(c, psi, a0, a1, b, y, x[0])
    else:
        y = x
        mu, s2 = garch_filter(c, psi, a0, a1, b, y, np.nan)
    total = 0.0
    for t in range(y.shape[0]):
        v = s2[t]
        if not v > 1e-300:
            return BIG
        e = y[t] - mu[t]
        total += math.log(v) + e * e / v
    if not math.isfinite(total):
        return BIG
    return 0.5 * total


@njit(cache=True)
def std_t_logpdf(nu, x):
    s2 = nu - 2.0
    return (math.lgamma((nu + 1.0) / 2.0) - math.lgamma(nu / 2.0)
            - 0.5 * math.log(math.pi * s2)
            - (nu + 1.0) / 2.0 * math.log1p(x * x / s2))


@njit(cache=True)
def skew_constants(nu, xi):
    log_beta = math.lgamma(0.5) + math.lgamma(nu / 2.0) - math.lgamma((nu + 1.0) / 2.0)
    m1 = 2.0 * math.sqrt(nu - 2.0) / (nu - 1.0) / math.exp(log_beta)
    mu = m1 * (xi - 1.0 / xi)
    sigma = math.sqrt((1.0 - m1 * m1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * m1 * m1 - 1.0)
    g = 2.0 / (xi + 1.0 / xi)
    return mu, sigma, g


@njit(cache=True)
def innovation_nll(theta, code, z):
    nu = 2.0 + math.exp(theta[0])
    if nu > NU_MAX:
        return BIG
    total = 0.0
    if code == NLL_T:
        for i in range(z.shape[0]):
            total -= std_t_logpdf(nu, z[i])
        return total
    xi = math.exp(theta[1])
    if xi < 1e-3 or xi > 1e3:
        return BIG
    mu, sigma, g = skew_constants(nu, xi)
    const = math.log(g) + math.log(sigma)
    for i in range(z.shape[0]):
        y = z[i] * sigma + mu
        scale = xi if y >= 0.0 else 1.0 / xi
        total -= const + std_t_logpdf(nu, y / scale)
    return total


@njit(cache=True)
def objective(theta, code, data):
    if code == QML_AR1 or code == QML_ZERO:
        return qml_nll(theta, code, data)
    return innovation_nll(theta, code, data)


@njit(cache=True)
def nelder_mead(x0, step, code, data, max_evals, xtol, ftol):
    """Minimize ``objective(., code, data)``; returns (x, f, evals, converged)."""
    d = x0.shape[0]
    simplex = np.empty((d + 1, d))
    fvals = np.empty(d + 1)
    simplex[0] = x0
    for i in range(d):
        simplex[i + 1] = x0
        simplex[i + 1, i] += step[i]
    for i in range(d + 1):
        fvals[i] = objective(simplex[i], code, data)
    evals = d + 1
    converged = False
    while evals < max_evals:
        order = np.argsort(fvals)
        simplex = simplex[order]
        fvals = fvals[order]
        size = 0.0
        for i in range(1, d + 1):
            for j in range(d):
                size = max(size, abs(simplex[i, j] - simplex[0, j]))
        if size <= xtol and abs(fvals[d] - fvals[0]) <= ftol * (1.0 + abs(fvals[0])):
            converged = True
            break
        centroid = np.zeros(d)
        for i in range(d):
            centroid += simplex[i]
        centroid /= d
        worst = simplex[d]
        xr = centroid + (centroid - worst)
        fr = objective(xr, code, data)
        evals += 1
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = objective(xe, code, data)
            evals += 1
            if fe < fr:
                simplex[d] = xe
                fvals[d] = fe
            else:
                simplex[d] = xr
                fvals[d] = fr
        elif fr < fvals[d - 1]:
            simplex[d] = xr
            fvals[d] = fr
        else:
            if fr < fvals[d]:
                xc = centroid + 0.5 * (xr - centroid)
            else:
                xc = centroid + 0.5 * (worst - centroid)
            fc = objective(xc, code, data)
            evals += 1
            if fc < min(fr, fvals[d]):
                simplex[d] = xc
                fvals[d] = fc
            else:
                for i in range(1, d + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = objective(simplex[i], code, data)
                evals += d
    best = np.argmin(fvals)
    return simplex[best].copy(), fvals[best], evals, converged


@njit(cache=True)
def empirical_var_es(x, p):
    """Order statistic at ceil(n p) and the mean of the top floor(n (1 - p))."""
    n = x.shape[0]
    s = np.sort(x)
    k = int(math.ceil(n * p - 1e-9))
    k = min(max(k, 1), n)
    m = int(math.floor(n * (1.0 - p) + 1e-9))
    tail = 0.0
    for i in range(n - m, n):
        tail += s[i]
    return s[k - 1], tail / m
