"""Maximum-likelihood fitting and odds-ratio-preserving table construction."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .design import ContingencyTable, ModelMatrices, SchemeSpec
from .errors import ConvergenceError, DomainError
from .matkit import left_inverse, unvec, vec

log = logging.getLogger(__name__)

FIT_TOL = 1e-10
FIT_MAX_ITER = 100
FIT_MAX_HALVING = 10
IPF_TOL = 1e-12
IPF_MAX_SWEEPS = 10_000

_STATUS_TEXT = {
    kernels.MAX_ITER: "iteration limit reached",
    kernels.HALVING_FAILED: "step halving could not increase the likelihood",
    kernels.NON_FINITE: "fitted values overflowed",
    kernels.SINGULAR_HESSIAN: "the information matrix became singular",
}


@dataclass(frozen=True)
class FitResult:
    """Fitted expectations and parameters of a log-linear association model."""

    mu_hat: ContingencyTable
    eta_hat: np.ndarray
    alpha_hat: float
    rho_hat: np.ndarray
    gamma_hat: np.ndarray
    theta_hat: np.ndarray
    converged: bool
    iterations: int
    max_gradient: float

    @property
    def theta_vec(self) -> np.ndarray:
        return vec(self.theta_hat)

    @property
    def lambda_hat(self) -> np.ndarray:
        """Compound parameter ``(gamma°, vec theta)``."""
        return np.concatenate([self.gamma_hat, self.theta_vec])

    def to_dict(self) -> dict:
        return {
            "mu_hat": self.mu_hat.cells.tolist(),
            "eta_hat": self.eta_hat.tolist(),
            "alpha_hat": float(self.alpha_hat),
            "rho_hat": self.rho_hat.tolist(),
            "gamma_hat": self.gamma_hat.tolist(),
            "theta_hat": self.theta_hat.tolist(),
            "theta_vec": self.theta_vec.tolist(),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "max_gradient": float(self.max_gradient),
        }


def extract_lambda(eta, mm: ModelMatrices):
    """Column parameters ``gamma° = Bᵀη`` and ``vec θ = Z°⁻ Cᵀ η``."""
    eta = np.asarray(eta, dtype=float)
    gamma = mm.B.T @ eta
    theta_vec = left_inverse(mm.Zcirc) @ (mm.C.T @ eta)
    return gamma, theta_vec


def eta_from_parameters(alpha, rho, gamma, theta, mm: ModelMatrices) -> np.ndarray:
    """Log-expectations ``α + ρ_j + γ_k + z_jkᵀ vec θ`` (with ρ_0 = γ_0 = 0)."""
    rho_full = np.concatenate([[0.0], np.asarray(rho, dtype=float).ravel()])
    gamma_full = np.concatenate([[0.0], np.asarray(gamma, dtype=float).ravel()])
    base = alpha + rho_full[:, None] + gamma_full[None, :]
    return vec(base) + mm.Z @ vec(theta)


def fit_loglinear(
    table: ContingencyTable,
    mm: ModelMatrices,
    *,
    tol: float = FIT_TOL,
    max_iter: int = FIT_MAX_ITER,
    max_halving: int = FIT_MAX_HALVING,
) -> FitResult:
    """Maximum-likelihood fit of the association model to an observed table.

    The same estimate serves the M, P, MR and MC sampling schemes, so no
    scheme is taken.  Newton iterations on the Poisson likelihood run over
    the coefficients of ``mm.Hbasis`` with step halving; convergence needs
    both ``max |Hᵀ(r - μ)| <= tol (1 + n)`` and a relative change of η below
    ``tol``.
    """
    if table.cells.shape != (mm.n_rows, mm.n_cols):
        raise DomainError(f"table shape {table.cells.shape} does not match design {(mm.n_rows, mm.n_cols)}")
    for name, totals in (("row", table.row_totals), ("column", table.col_totals)):
        zero = np.flatnonzero(totals <= 0)
        if zero.size:
            raise DomainError(f"{name} {int(zero[0])} has zero total; the estimate does not exist")

    h = np.array(mm.Hbasis, dtype=np.float64)
    r = table.vector()
    n = r.sum()
    beta0, *_ = np.linalg.lstsq(h, np.log(r + 0.5), rcond=None)
    beta, iterations, status, max_grad = kernels.newton_poisson(
        h, r, beta0, tol * (1.0 + n), tol, max_iter, max_halving
    )
    eta = h @ beta
    if status != kernels.CONVERGED:
        mu = np.exp(eta)
        smallest = int(np.argmin(mu))
        j, k = smallest % mm.n_rows, smallest // mm.n_rows
        raise ConvergenceError(
            f"log-linear fit did not converge ({_STATUS_TEXT[status]}) after {iterations} iterations; "
            f"smallest fitted cell ({j}, {k}) = {mu[smallest]:.3g}, which suggests the estimate does not exist",
            iterations=int(iterations),
            diagnostics={"smallest_cell": (j, k), "smallest_value": float(mu[smallest]), "max_gradient": float(max_grad)},
        )

    mu = np.exp(eta)
    gamma, theta_vec = extract_lambda(eta, mm)
    eta_tab = unvec(eta, mm.n_rows, mm.n_cols)
    return FitResult(
        mu_hat=ContingencyTable(unvec(mu, mm.n_rows, mm.n_cols), table.row_labels, table.col_labels, kind="expected"),
        eta_hat=eta,
        alpha_hat=float(eta_tab[0, 0]),
        rho_hat=eta_tab[1:, 0] - eta_tab[0, 0],
        gamma_hat=gamma,
        theta_hat=unvec(theta_vec, *mm.theta_shape),
        converged=True,
        iterations=int(iterations),
        max_gradient=float(max_grad),
    )


def _as_distribution(v, name: str, size: int) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.size != size:
        raise DomainError(f"{name} has {v.size} entries, expected {size}")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise DomainError(f"{name} must be strictly positive")
    if abs(v.sum() - 1.0) > 1e-9:
        raise DomainError(f"{name} must sum to 1 (sums to {v.sum():.12g})")
    return v / v.sum()


def log_odds_ratios(table) -> np.ndarray:
    """``log(p_jk p_00 / (p_j0 p_0k))`` for ``j, k > 0`` as a J x K array."""
    t = np.log(np.asarray(getattr(table, "cells", table), dtype=float))
    return t[1:, 1:] + t[0, 0] - t[1:, :1] - t[:1, 1:]


def ipf_constrained(
    theta_prime,
    row_marg,
    col_marg,
    mm: ModelMatrices,
    *,
    tol: float = IPF_TOL,
    max_sweeps: int = IPF_MAX_SWEEPS,
    callback=None,
) -> ContingencyTable:
    """Joint density with the given marginals and log odds ratios ``Z vec θ′``.

    Starts from ``exp(z_jkᵀ vec θ′)`` and alternately rescales rows and
    columns; rescaling leaves every odds ratio unchanged.  ``callback``, if
    given, is called as ``callback(sweep, table, discrepancy)`` after every
    sweep.
    """
    row_marg = _as_distribution(row_marg, "row_marg", mm.n_rows)
    col_marg = _as_distribution(col_marg, "col_marg", mm.n_cols)
    theta_vec = vec(theta_prime)
    if theta_vec.size != mm.L:
        raise DomainError(f"theta has {theta_vec.size} entries, design needs {mm.L}")
    psi = unvec(mm.Z @ theta_vec, mm.n_rows, mm.n_cols)
    table = np.exp(psi - psi.max())
    table = np.ascontiguousarray(table)

    prev = np.inf
    disc = np.inf
    for sweep in range(1, max_sweeps + 1):
        disc = kernels.ipf_sweep(table, row_marg, col_marg)
        if callback is not None:
            callback(sweep, table.copy(), disc)
        if disc > prev * (1.0 + 1e-9) + 1e-15:
            warnings.warn(
                f"IPF marginal discrepancy increased at sweep {sweep}: {prev:.3g} -> {disc:.3g}",
                RuntimeWarning,
                stacklevel=2,
            )
        prev = disc
        if disc <= tol:
            log.debug("IPF converged after %d sweeps (discrepancy %.3g)", sweep, disc)
            return ContingencyTable(table, kind="expected")
    raise ConvergenceError(
        f"IPF did not converge in {max_sweeps} sweeps; final marginal discrepancy {disc:.3g}",
        iterations=max_sweeps,
        diagnostics={"discrepancy": float(disc)},
    )


def expected_table(p, scheme: SchemeSpec) -> ContingencyTable:
    """Expected counts of a joint density ``p`` under a sampling scheme."""
    p = np.asarray(getattr(p, "cells", p), dtype=float)
    if p.ndim != 2 or np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise DomainError("p must be a strictly positive two-way table")
    if abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"p must sum to 1 (sums to {p.sum():.12g})")
    if scheme.scheme == "M":
        mu = scheme.total_n * p
    elif scheme.scheme == "P":
        mu = scheme.nu * p
    elif scheme.scheme == "MR":
        sizes = scheme.row_sizes
        if sizes.size != p.shape[0]:
            raise DomainError(f"MR needs {p.shape[0]} row sizes, got {sizes.size}")
        rows = p.sum(axis=1)
        if np.any(rows <= 0):
            raise DomainError("zero row marginal under row-conditional sampling")
        mu = sizes[:, None] * p / rows[:, None]
    else:
        sizes = scheme.col_sizes
        if sizes.size != p.shape[1]:
            raise DomainError(f"MC needs {p.shape[1]} column sizes, got {sizes.size}")
        cols = p.sum(axis=0)
        if np.any(cols <= 0):
            raise DomainError("zero column marginal under column-conditional sampling")
        mu = sizes[None, :] * p / cols[None, :]
    return ContingencyTable(mu, kind="expected")
