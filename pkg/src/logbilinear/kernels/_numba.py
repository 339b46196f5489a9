"""numba-compiled kernels; loop-level twins of ``_numpy``."""

from __future__ import annotations

import numpy as np
from numba import njit

from ._numpy import CONVERGED, HALVING_FAILED, MAX_ITER, NON_FINITE, SINGULAR_HESSIAN


@njit(cache=True)
def ipf_sweep(table, row_marg, col_marg):
    n_rows, n_cols = table.shape
    for j in range(n_rows):
        s = 0.0
        for k in range(n_cols):
            s += table[j, k]
        f = row_marg[j] / s
        for k in range(n_cols):
            table[j, k] *= f
    for k in range(n_cols):
        s = 0.0
        for j in range(n_rows):
            s += table[j, k]
        f = col_marg[k] / s
        for j in range(n_rows):
            table[j, k] *= f
    err = 0.0
    for j in range(n_rows):
        s = 0.0
        for k in range(n_cols):
            s += table[j, k]
        err = max(err, abs(s - row_marg[j]))
    for k in range(n_cols):
        s = 0.0
        for j in range(n_rows):
            s += table[j, k]
        err = max(err, abs(s - col_marg[k]))
    return err


@njit(cache=True)
def _cholesky_solve(a, b):
    # returns (x, ok); ok is False when a is not numerically positive definite
    n = a.shape[0]
    low = np.zeros((n, n))
    scale = 0.0
    for i in range(n):
        scale = max(scale, abs(a[i, i]))
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for m in range(j):
                s -= low[i, m] * low[j, m]
            if i == j:
                if not s > 1e-14 * scale:
                    return b.copy(), False
                low[i, i] = np.sqrt(s)
            else:
                low[i, j] = s / low[j, j]
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        for m in range(i):
            s -= low[i, m] * y[m]
        y[i] = s / low[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for m in range(i + 1, n):
            s -= low[m, i] * x[m]
        x[i] = s / low[i, i]
    return x, True


@njit(cache=True)
def newton_poisson(h, r, beta, grad_tol, step_tol, max_iter, max_halving):
    beta = beta.copy()
    ht = np.ascontiguousarray(h.T)
    eta = h @ beta
    mu = np.exp(eta)
    ll = r @ eta - mu.sum()
    grad = ht @ (r - mu)
    max_grad = np.max(np.abs(grad))
    p = h.shape[1]
    for it in range(1, max_iter + 1):
        hess = np.empty((p, p))
        for a in range(p):
            for b in range(a, p):
                s = 0.0
                for i in range(h.shape[0]):
                    s += h[i, a] * mu[i] * h[i, b]
                hess[a, b] = s
                hess[b, a] = s
        step, ok = _cholesky_solve(hess, grad)
        if not ok:
            return beta, it, SINGULAR_HESSIAN, max_grad
        t = 1.0
        accepted = False
        beta_new = beta
        eta_new = eta
        mu_new = mu
        ll_new = ll
        for _ in range(max_halving + 1):
            beta_new = beta + t * step
            eta_new = h @ beta_new
            mu_new = np.exp(eta_new)
            ll_new = r @ eta_new - mu_new.sum()
            if np.isfinite(ll_new) and ll_new >= ll - 1e-13 * (1.0 + abs(ll)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return beta, it, HALVING_FAILED, max_grad
        change = np.max(np.abs(eta_new - eta)) / (1.0 + np.max(np.abs(eta_new)))
        beta = beta_new
        eta = eta_new
        mu = mu_new
        ll = ll_new
        grad = ht @ (r - mu)
        max_grad = np.max(np.abs(grad))
        if not np.all(np.isfinite(mu)):
            return beta, it, NON_FINITE, max_grad
        if max_grad <= grad_tol and change <= step_tol:
            return beta, it, CONVERGED, max_grad
    return beta, max_iter, MAX_ITER, max_grad


@njit(cache=True)
def ctdc(mu):
    n_j = mu.shape[0] - 1
    n_k = mu.shape[1] - 1
    size = n_j * n_k
    out = np.empty((size, size))
    for k in range(1, n_k + 1):
        for j in range(1, n_j + 1):
            a = (k - 1) * n_j + (j - 1)
            for m in range(1, n_k + 1):
                for l in range(1, n_j + 1):
                    b = (m - 1) * n_j + (l - 1)
                    v = 1.0 / mu[0, 0]
                    if j == l:
                        v += 1.0 / mu[j, 0]
                    if k == m:
                        v += 1.0 / mu[0, k]
                    if a == b:
                        v += 1.0 / mu[j, k]
                    out[a, b] = v
    return out


@njit(cache=True)
def mr_covariance(mu):
    n_rows, n_cols = mu.shape
    size = n_rows * n_cols
    out = np.zeros((size, size))
    for j in range(n_rows):
        tot = 0.0
        for k in range(n_cols):
            tot += mu[j, k]
        for k in range(n_cols):
            a = k * n_rows + j
            for m in range(n_cols):
                b = m * n_rows + j
                out[a, b] = -mu[j, k] * mu[j, m] / tot
            out[a, a] += mu[j, k]
    return out


__all__ = [
    "CONVERGED",
    "HALVING_FAILED",
    "MAX_ITER",
    "NON_FINITE",
    "ctdc",
    "ipf_sweep",
    "mr_covariance",
    "newton_poisson",
]
