"""Monte Carlo draws of contingency tables and the empirical covariance of θ̂."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .asycov import sigma_theta_projection
from .design import ContingencyTable, DesignSpec, ModelMatrices, SchemeSpec
from .errors import ConvergenceError, DomainError, LogBilinearError
from .fit import expected_table, fit_loglinear
from .power import HypothesisSpec, wald_test

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimulationConfig:
    p: np.ndarray
    scheme: SchemeSpec
    replications: int
    seed: int = 0
    min_expected_cell: float = 5.0

    def __post_init__(self):
        p = np.array(getattr(self.p, "cells", self.p), dtype=float)
        if p.ndim != 2 or np.any(~np.isfinite(p)) or np.any(p <= 0):
            raise DomainError("p must be a strictly positive two-way table")
        if abs(p.sum() - 1.0) > 1e-9:
            raise DomainError(f"p must sum to 1 (sums to {p.sum():.12g})")
        if self.replications < 1:
            raise DomainError("replications must be at least 1")
        if not 0 <= int(self.seed) <= _MASK64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        sizes = {"MR": self.scheme.row_sizes, "MC": self.scheme.col_sizes}.get(self.scheme.scheme)
        if sizes is not None:
            if np.any(sizes != np.round(sizes)):
                raise DomainError("subsample sizes must be whole numbers")
            if sizes.size != (p.shape[0] if self.scheme.scheme == "MR" else p.shape[1]):
                raise DomainError("subsample sizes do not match the table shape")
        if self.scheme.scheme == "M" and self.scheme.total_n != round(self.scheme.total_n):
            raise DomainError("total_n must be a whole number")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "replications", int(self.replications))


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for replicate ``index``; independent of run order."""
    return np.random.Generator(np.random.Philox(key=(int(index) << 64) | (int(seed) & _MASK64)))


def _multinomial(rng: np.random.Generator, n: int, probs: np.ndarray) -> np.ndarray:
    # sequential binomial conditioning
    out = np.zeros(probs.size, dtype=np.int64)
    remaining = int(n)
    mass = float(probs.sum())
    for i in range(probs.size - 1):
        if remaining == 0:
            break
        frac = min(1.0, probs[i] / mass) if mass > 0 else 0.0
        out[i] = rng.binomial(remaining, frac)
        remaining -= out[i]
        mass -= probs[i]
    out[-1] += remaining
    return out


def sample_table(config: SimulationConfig, replicate_index: int) -> ContingencyTable:
    """One random table drawn under the configured scheme."""
    rng = replicate_rng(config.seed, replicate_index)
    p = config.p
    scheme = config.scheme
    if scheme.scheme == "M":
        counts = _multinomial(rng, int(scheme.total_n), p.reshape(-1, order="F"))
        cells = counts.reshape(p.shape, order="F")
    elif scheme.scheme == "P":
        total = rng.poisson(scheme.nu)
        cells = _multinomial(rng, total, p.reshape(-1, order="F")).reshape(p.shape, order="F")
    elif scheme.scheme == "MR":
        cells = np.vstack([_multinomial(rng, int(n_j), p[j]) for j, n_j in enumerate(scheme.row_sizes)])
    else:
        cells = np.column_stack([_multinomial(rng, int(m_k), p[:, k]) for k, m_k in enumerate(scheme.col_sizes)])
    return ContingencyTable(cells.astype(float))


@dataclass(frozen=True)
class MonteCarloReport:
    n_success: int
    n_failed_fits: int
    theta_mean: np.ndarray
    empirical_cov: np.ndarray
    asymptotic_cov: np.ndarray
    max_relative_error: float
    cov_defined: bool
    replications: int
    rejection_rate: float | None = None
    warnings: tuple[str, ...] = ()
    theta_draws: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "replications": self.replications,
            "n_success": self.n_success,
            "n_failed_fits": self.n_failed_fits,
            "theta_mean": self.theta_mean.tolist(),
            "empirical_cov": None if not self.cov_defined else self.empirical_cov.tolist(),
            "asymptotic_cov": self.asymptotic_cov.tolist(),
            "max_relative_error": None if not self.cov_defined else self.max_relative_error,
            "cov_defined": self.cov_defined,
            "rejection_rate": self.rejection_rate,
            "warnings": list(self.warnings),
        }


def _one_replicate(config, mm, hypothesis, index):
    table = sample_table(config, index)
    if np.any(table.row_totals <= 0) or np.any(table.col_totals <= 0):
        return None, None
    try:
        fit = fit_loglinear(table, mm)
    except ConvergenceError:
        return None, None
    theta = fit.theta_vec
    if hypothesis is None:
        return theta, None
    try:
        _, p_value, _ = wald_test(theta, sigma_theta_projection(fit.mu_hat, mm), hypothesis)
    except LogBilinearError:
        return None, None
    return theta, p_value < hypothesis.alpha


def monte_carlo_cov(
    config: SimulationConfig,
    mm: ModelMatrices,
    spec: DesignSpec | None = None,
    *,
    hypothesis: HypothesisSpec | None = None,
    n_jobs: int = 1,
    keep_draws: bool = False,
) -> MonteCarloReport:
    """Empirical mean and covariance of θ̂ over independent replicates.

    Replicates with an empty row or column, or a fit that fails, are
    excluded and counted.  With ``hypothesis`` the Wald rejection rate at
    the fitted covariance is reported too.  The report does not depend on
    ``n_jobs``.
    """
    if config.p.shape != (mm.n_rows, mm.n_cols):
        raise DomainError("p does not match the design shape")
    notes = []
    mu_theory = expected_table(config.p, config.scheme)
    if mu_theory.cells.min() < config.min_expected_cell:
        notes.append(
            f"smallest expected cell {mu_theory.cells.min():.3g} is below {config.min_expected_cell}; "
            "asymptotic approximations may be poor"
        )
        log.warning(notes[-1])
    asymptotic = sigma_theta_projection(mu_theory, mm)

    indices = range(config.replications)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda i: _one_replicate(config, mm, hypothesis, i), indices))
    else:
        results = [_one_replicate(config, mm, hypothesis, i) for i in indices]

    ok = [i for i, (theta, _) in enumerate(results) if theta is not None]
    if not ok:
        raise ConvergenceError("every Monte Carlo replicate failed to produce an estimate", iterations=0)
    draws = np.array([results[i][0] for i in ok])
    mean = draws.mean(axis=0)
    cov_defined = len(ok) >= 2
    if cov_defined:
        centred = draws - mean
        empirical = centred.T @ centred / (len(ok) - 1)
        max_rel = float(np.max(np.abs(empirical - asymptotic)) / np.max(np.abs(asymptotic)))
    else:
        empirical = np.full_like(asymptotic, np.nan)
        max_rel = float("nan")
        notes.append("empirical covariance undefined with fewer than two successful replicates")
    rejection = None
    if hypothesis is not None:
        rejection = float(np.mean([results[i][1] for i in ok]))
    return MonteCarloReport(
        n_success=len(ok),
        n_failed_fits=config.replications - len(ok),
        theta_mean=mean,
        empirical_cov=empirical,
        asymptotic_cov=asymptotic,
        max_relative_error=max_rel,
        cov_defined=cov_defined,
        replications=config.replications,
        rejection_rate=rejection,
        warnings=tuple(notes),
        theta_draws=draws if keep_draws else None,
    )
