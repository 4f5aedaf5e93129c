"""Compiled inner loops: GIG variates and the Gibbs sweep.

Random numbers come from numba's internal generator, seeded explicitly at
the top of every entry point so each call is reproducible on its own.
"""
import math

import numpy as np
from numba import njit

PRIOR_DE = 0
PRIOR_TPBN = 1
PRIOR_STUDENT_T = 2

STATUS_OK = 0
STATUS_NONFINITE = 1

_GAMMA_FLOOR = 1e-300
_PREC_CAP = 1e300
_OMEGA_SMALL = 1e-8


@njit(cache=True)
def _psi(x, alpha, lam):
    return -alpha * (math.cosh(x) - 1.0) - lam * (math.exp(x) - x - 1.0)


@njit(cache=True)
def _dpsi(x, alpha, lam):
    return -alpha * math.sinh(x) - lam * (math.exp(x) - 1.0)


@njit(cache=True)
def _gig_two_param(lam, omega):
    """Draw from GIG(lam, omega), lam >= 0.

    Density proportional to x^(lam-1) exp(-omega (x + 1/x) / 2).

    Devroye (2014): rejection from a three-piece envelope on log x.
    """
    # sqrt(omega^2 + lam^2) - lam without cancellation
    alpha = omega * omega / (math.sqrt(omega * omega + lam * lam) + lam)

    x = -_psi(1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        t = 1.0
    elif x > 2.0:
        t = math.sqrt(2.0 / (alpha + lam))
    else:
        t = math.log(4.0 / (alpha + 2.0 * lam))

    x = -_psi(-1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        s = 1.0
    elif x > 2.0:
        s = math.sqrt(4.0 / (alpha * math.cosh(1.0) + lam))
    else:
        if alpha == 0.0:
            s = 1.0 / lam
        else:
            s = math.log(1.0 + 1.0 / alpha + math.sqrt(1.0 / (alpha * alpha) + 2.0 / alpha))
            if lam > 0.0:
                s = min(1.0 / lam, s)

    eta = -_psi(t, alpha, lam)
    zeta = -_dpsi(t, alpha, lam)
    theta = -_psi(-s, alpha, lam)
    xi = _dpsi(-s, alpha, lam)
    p = 1.0 / xi
    r = 1.0 / zeta
    td = t - r * eta
    sd = s - p * theta
    q = td + sd

    while True:
        u = np.random.random()
        v = np.random.random()
        w = np.random.random()
        if u < q / (p + q + r):
            rnd = -sd + q * v
        elif u < (q + r) / (p + q + r):
            rnd = td - r * math.log(v)
        else:
            rnd = -sd + p * math.log(v)
        if rnd > td:
            g = math.exp(-eta - zeta * (rnd - t))
        elif rnd < -sd:
            g = math.exp(-theta + xi * (rnd + s))
        else:
            g = 1.0
        if w * g <= math.exp(_psi(rnd, alpha, lam)):
            break
    # mode-centred parametrization back to the standard one
    return math.exp(rnd) * (lam / omega + math.sqrt(1.0 + lam * lam / (omega * omega)))


@njit(cache=True)
def gig_draw(p, a, b):
    """One GIG(p, a, b) draw, density prop. to x^(p-1) exp(-(a x + b/x) / 2).

    ``b == 0`` (with p > 0) is the gamma(p, rate a/2) limit; ``a == 0``
    (with p < 0) is the inverse-gamma(-p, b/2) limit.
    """
    if b <= 0.0:
        return np.random.gamma(p, 2.0 / a)
    if a <= 0.0:
        return (b / 2.0) / np.random.gamma(-p, 1.0)
    omega = math.sqrt(a * b)
    lam = abs(p)
    if omega < _OMEGA_SMALL and lam > 0.0:
        # the omega -> 0 limit is exact to O(omega) in relative terms
        if p > 0.0:
            return np.random.gamma(p, 2.0 / a)
        return (b / 2.0) / np.random.gamma(-p, 1.0)
    x = _gig_two_param(lam, omega)
    if p < 0.0:
        x = 1.0 / x
    return x * math.sqrt(b / a)


@njit(cache=True)
def gig_batch(p, a, b, size, seed):
    np.random.seed(seed)
    out = np.empty(size)
    for i in range(size):
        out[i] = gig_draw(p, a, b)
    return out


@njit(cache=True)
def _chol_solve_sample(A, rhs, scale):
    """Return A^{-1} rhs + scale * L^{-T} z with A = L L^T, z standard normal."""
    p = A.shape[0]
    L = np.linalg.cholesky(A)
    # forward: L y = rhs
    y = np.empty(p)
    for i in range(p):
        acc = rhs[i]
        for k in range(i):
            acc -= L[i, k] * y[k]
        y[i] = acc / L[i, i]
    for i in range(p):
        y[i] += scale * np.random.standard_normal()
    # backward: L^T x = y
    x = np.empty(p)
    for i in range(p - 1, -1, -1):
        acc = y[i]
        for k in range(i + 1, p):
            acc -= L[k, i] * x[k]
        x[i] = acc / L[i, i]
    return x


@njit(cache=True)
def run_chain(X, Y, XtX, XtY, prior_code, h1, h2, tau_grid, sigma2_fixed,
              beta0, sigma2_0, iterations, burn_in, thin, seed):
    """Cyclic Gibbs sampler.

    ``h1, h2`` are the prior hyperparameters: (b, -) for DE, (u, a) for
    TPBN, (a, -) for Student-t. A one-point ``tau_grid`` fixes tau.
    ``sigma2_fixed > 0`` pins the noise variance.

    Returns (status, failed_iteration, beta, sigma2, gamma, tau).
    """
    np.random.seed(seed)
    n, p = X.shape
    kept = (iterations - burn_in + thin - 1) // thin
    out_beta = np.empty((kept, p))
    out_gamma = np.empty((kept, p))
    out_sigma2 = np.empty(kept)
    out_tau = np.empty(kept)

    beta = beta0.copy()
    gamma = np.ones(p)
    lam = np.ones(p)
    sigma2 = sigma2_fixed if sigma2_fixed > 0.0 else sigma2_0
    n_grid = tau_grid.shape[0]
    tau = tau_grid[n_grid // 2]
    log_w = np.empty(n_grid)
    A = np.empty((p, p))
    a0 = 1e-3
    b0 = 1e-3

    k = 0
    for it in range(iterations):
        # beta | rest
        for i in range(p):
            for j in range(p):
                A[i, j] = XtX[i, j]
            A[i, i] += min(1.0 / (tau * gamma[i]), _PREC_CAP)
        beta = _chol_solve_sample(A, XtY, math.sqrt(sigma2))

        # gamma (and lambda) | rest
        for i in range(p):
            q = beta[i] * beta[i] / (sigma2 * tau)
            if prior_code == PRIOR_DE:
                g = gig_draw(0.5, 2.0 * h1, q)
            elif prior_code == PRIOR_TPBN:
                g = gig_draw(h1 - 0.5, 2.0 * lam[i], q)
            else:
                g = (h1 + 0.5 * q) / np.random.gamma(h1 + 0.5, 1.0)
            gamma[i] = max(g, _GAMMA_FLOOR)
            if prior_code == PRIOR_TPBN:
                lam[i] = np.random.gamma(h1 + h2, 1.0 / (1.0 + gamma[i]))

        # sigma2 | rest
        if sigma2_fixed <= 0.0:
            rss = 0.0
            for r in range(n):
                acc = Y[r]
                for j in range(p):
                    acc -= X[r, j] * beta[j]
                rss += acc * acc
            pen = 0.0
            for i in range(p):
                pen += beta[i] * beta[i] / (tau * gamma[i])
            shape = 0.5 * (n + p) + a0
            scale = 0.5 * (rss + pen) + b0
            sigma2 = scale / np.random.gamma(shape, 1.0)

        # tau | rest on the grid
        if n_grid > 1:
            ssq = 0.0
            for i in range(p):
                ssq += beta[i] * beta[i] / gamma[i]
            ssq /= sigma2
            mx = -np.inf
            for j in range(n_grid):
                log_w[j] = -0.5 * p * math.log(tau_grid[j]) - 0.5 * ssq / tau_grid[j]
                mx = max(mx, log_w[j])
            tot = 0.0
            for j in range(n_grid):
                log_w[j] = math.exp(log_w[j] - mx)
                tot += log_w[j]
            u = np.random.random() * tot
            j = 0
            acc = log_w[0]
            while acc < u and j < n_grid - 1:
                j += 1
                acc += log_w[j]
            tau = tau_grid[j]

        ok = math.isfinite(sigma2) and sigma2 > 0.0
        for i in range(p):
            ok = ok and math.isfinite(beta[i]) and math.isfinite(gamma[i])
        if not ok:
            return STATUS_NONFINITE, it, out_beta, out_sigma2, out_gamma, out_tau

        if it >= burn_in and (it - burn_in) % thin == 0:
            out_beta[k] = beta
            out_gamma[k] = gamma
            out_sigma2[k] = sigma2
            out_tau[k] = tau
            k += 1
    return STATUS_OK, -1, out_beta, out_sigma2, out_gamma, out_tau


@njit(cache=True)
def lasso_cd_gram(G, c, pen, beta, tol, max_sweeps):
    """Cyclic coordinate descent on ``||y - X b||^2 + sum pen_j |b_j|``.

    Works from ``G = X'X`` (unit diagonal, or zero for dropped columns) and
    ``c = X'y``; ``beta`` is the warm start and is updated in place.
    Returns (sweeps, converged).
    """
    p = c.shape[0]
    grad = c - G @ beta  # X'(y - X b)
    for sweep in range(1, max_sweeps + 1):
        max_step = 0.0
        for j in range(p):
            if G[j, j] == 0.0:
                continue
            z = grad[j] + beta[j]
            thr = 0.5 * pen[j]
            if z > thr:
                new = z - thr
            elif z < -thr:
                new = z + thr
            else:
                new = 0.0
            step = new - beta[j]
            if step != 0.0:
                for k in range(p):
                    grad[k] -= G[k, j] * step
                beta[j] = new
                max_step = max(max_step, abs(step))
        if max_step < tol:
            return sweep, True
    return max_sweeps, False
