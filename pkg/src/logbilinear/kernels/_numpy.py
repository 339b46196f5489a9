"""Pure-numpy reference kernels.

Each function here has a loop-level twin in ``_numba``; the two are kept
numerically interchangeable and are compared in the test suite.
"""

from __future__ import annotations

import numpy as np

# Newton exit codes shared with the numba twin.
CONVERGED = 0
MAX_ITER = 1
HALVING_FAILED = 2
NON_FINITE = 3
SINGULAR_HESSIAN = 4


def ipf_sweep(table, row_marg, col_marg):
    """Scale rows then columns of ``table`` in place.

    Returns the largest absolute marginal discrepancy after the sweep.
    """
    table *= (row_marg / table.sum(axis=1))[:, None]
    table *= (col_marg / table.sum(axis=0))[None, :]
    row_err = np.max(np.abs(table.sum(axis=1) - row_marg))
    col_err = np.max(np.abs(table.sum(axis=0) - col_marg))
    return max(row_err, col_err)


def poisson_loglik(r, eta):
    return float(r @ eta - np.exp(eta).sum())


def _cholesky_solve(a, b):
    # None when a is not numerically positive definite (same pivot rule as the twin)
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    if not np.min(np.diag(low)) ** 2 > 1e-14 * np.max(np.abs(np.diag(a))):
        return None
    return np.linalg.solve(low.T, np.linalg.solve(low, b))


def newton_poisson(h, r, beta, grad_tol, step_tol, max_iter, max_halving):
    """Newton iterations for a Poisson log-linear model ``log mu = h @ beta``.

    Returns ``(beta, iterations, status, max_abs_gradient)``.
    """
    beta = beta.copy()
    ht = np.ascontiguousarray(h.T)
    eta = h @ beta
    mu = np.exp(eta)
    ll = r @ eta - mu.sum()
    grad = ht @ (r - mu)
    max_grad = np.max(np.abs(grad))
    for it in range(1, max_iter + 1):
        hess = (ht * mu) @ h
        step = _cholesky_solve(hess, grad)
        if step is None:
            return beta, it, SINGULAR_HESSIAN, max_grad
        t = 1.0
        accepted = False
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
        beta, eta, mu, ll = beta_new, eta_new, mu_new, ll_new
        grad = ht @ (r - mu)
        max_grad = np.max(np.abs(grad))
        if not np.all(np.isfinite(mu)):
            return beta, it, NON_FINITE, max_grad
        if max_grad <= grad_tol and change <= step_tol:
            return beta, it, CONVERGED, max_grad
    return beta, max_iter, MAX_ITER, max_grad


def _cell_rows(n_rows, n_cols):
    # column-major cell order, row index fastest
    return np.tile(np.arange(n_rows), n_cols), np.repeat(np.arange(n_cols), n_rows)


def ctdc(mu):
    """``Cᵀ D⁻¹ C`` filled entry by entry from the reciprocal cell means."""
    n_rows, n_cols = mu.shape
    jj, kk = _cell_rows(n_rows - 1, n_cols - 1)
    jj = jj + 1
    kk = kk + 1
    inv = 1.0 / mu
    same_j = jj[:, None] == jj[None, :]
    same_k = kk[:, None] == kk[None, :]
    out = np.full((jj.size, jj.size), inv[0, 0])
    out += same_j * inv[jj, 0][:, None]
    out += same_k * inv[0, kk][:, None]
    out += np.diag(inv[jj, kk])
    return out


def mr_covariance(mu):
    """Block-diagonal row-multinomial covariance in column-major cell order."""
    n_rows, n_cols = mu.shape
    rows, _ = _cell_rows(n_rows, n_cols)
    m = mu.reshape(-1, order="F")
    row_tot = mu.sum(axis=1)[rows]
    same = rows[:, None] == rows[None, :]
    return np.diag(m) - same * np.outer(m, m) / row_tot[:, None]
