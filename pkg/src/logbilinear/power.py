"""Wald tests of ``Qθ = 0``, their asymptotic power and sample-size search."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .asycov import sigma_theta_kron
from .design import ContingencyTable, DesignSpec, ModelMatrices
from .errors import DomainError
from .fit import ipf_constrained
from .matkit import numerical_rank, spd_solve, vec

POISSON_TAIL = 1e-14
QUANTILE_TOL = 1e-10


@dataclass(frozen=True)
class HypothesisSpec:
    """Linear hypothesis ``Q vec θ = 0`` tested at level ``alpha``."""

    Q: np.ndarray
    alpha: float = 0.05

    def __post_init__(self):
        q = np.array(self.Q, dtype=float)
        if q.ndim == 1:
            q = q[None, :]
        if q.ndim != 2 or q.size == 0 or not np.all(np.isfinite(q)):
            raise DomainError("Q must be a finite non-empty matrix")
        if numerical_rank(q) < q.shape[0]:
            raise DomainError(f"Q must have full row rank {q.shape[0]}")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        q.setflags(write=False)
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def df(self) -> int:
        return self.Q.shape[0]


@dataclass(frozen=True)
class PowerRequest:
    """Alternative ``θ′`` with target marginals and a sampling design.

    ``proportions`` are the relative subsample sizes: ``n_j / n`` per row for
    MR, ``m_k / n`` per column for MC; unused for M.
    """

    theta_prime: np.ndarray
    row_marg: np.ndarray
    col_marg: np.ndarray
    scheme: str = "M"
    proportions: np.ndarray | None = None
    n: float | None = None
    target_power: float | None = None

    def __post_init__(self):
        theta = np.array(self.theta_prime, dtype=float)
        if theta.ndim < 2:
            theta = theta.reshape(-1, 1)
        object.__setattr__(self, "theta_prime", theta)
        for name in ("row_marg", "col_marg"):
            v = np.array(getattr(self, name), dtype=float).ravel()
            if np.any(v <= 0) or abs(v.sum() - 1.0) > 1e-9:
                raise DomainError(f"{name} must be positive and sum to 1")
            object.__setattr__(self, name, v)
        if self.scheme not in ("M", "MR", "MC"):
            raise DomainError(f"power analysis supports schemes M, MR, MC; got {self.scheme!r}")
        if self.scheme != "M":
            if self.proportions is None:
                raise DomainError(f"scheme {self.scheme} needs sampling proportions")
            v = np.array(self.proportions, dtype=float).ravel()
            expected = self.row_marg.size if self.scheme == "MR" else self.col_marg.size
            if v.size != expected:
                raise DomainError(f"scheme {self.scheme} needs {expected} proportions, got {v.size}")
            if np.any(v <= 0) or abs(v.sum() - 1.0) > 1e-9:
                raise DomainError("proportions must be positive and sum to 1")
            object.__setattr__(self, "proportions", v)
        if self.n is not None and not self.n > 0:
            raise DomainError("n must be positive")
        if self.target_power is not None and not 0.0 < self.target_power < 1.0:
            raise DomainError("target_power must lie in (0, 1)")

    def transpose(self) -> "PowerRequest":
        """The same problem with rows and columns (and MR/MC) swapped."""
        swap = {"M": "M", "MR": "MC", "MC": "MR"}[self.scheme]
        return PowerRequest(
            self.theta_prime.T, self.col_marg, self.row_marg, swap, self.proportions, self.n, self.target_power
        )


# -- distribution functions ---------------------------------------------------


def _poisson_weights(lam: float):
    if lam == 0.0:
        return np.zeros(1), np.ones(1)
    hi = int(lam + 10.0 * math.sqrt(lam) + 20.0)
    while special.pdtrc(hi, lam) >= POISSON_TAIL:
        hi *= 2
    i = np.arange(hi + 1, dtype=float)
    return i, np.exp(i * math.log(lam) - lam - special.gammaln(i + 1.0))


def noncentral_chisq_cdf(x: float, df: int, noncentrality: float = 0.0) -> float:
    """CDF of the noncentral χ² as a Poisson mixture of central χ² CDFs.

    The series is truncated once the remaining Poisson tail mass is below
    1e-14.
    """
    if df < 1 or noncentrality < 0:
        raise DomainError("need df >= 1 and noncentrality >= 0")
    if x <= 0:
        return 0.0
    i, w = _poisson_weights(0.5 * noncentrality)
    return float(min(1.0, np.sum(w * special.gammainc(0.5 * df + i, 0.5 * x))))


def noncentral_chisq_sf(x: float, df: int, noncentrality: float = 0.0) -> float:
    """Upper tail ``1 - cdf``, summed directly to keep small tails accurate."""
    if df < 1 or noncentrality < 0:
        raise DomainError("need df >= 1 and noncentrality >= 0")
    if x <= 0:
        return 1.0
    i, w = _poisson_weights(0.5 * noncentrality)
    return float(min(1.0, np.sum(w * special.gammaincc(0.5 * df + i, 0.5 * x))))


def chisq_quantile(prob: float, df: int, tol: float = QUANTILE_TOL) -> float:
    """Central χ² quantile by bisection on the CDF."""
    if not 0.0 < prob < 1.0:
        raise DomainError("prob must lie in (0, 1)")
    lo, hi = 0.0, max(1.0, float(df))
    while noncentral_chisq_cdf(hi, df) < prob:
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if noncentral_chisq_cdf(mid, df) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- tests and power ----------------------------------------------------------


def _q_for(hyp: HypothesisSpec, length: int) -> np.ndarray:
    if hyp.Q.shape[1] != length:
        raise DomainError(f"Q has {hyp.Q.shape[1]} columns but theta has {length} entries")
    return hyp.Q


def wald_test(theta_hat, sigma_theta, hyp: HypothesisSpec):
    """Wald statistic, p-value and degrees of freedom for ``Qθ = 0``."""
    theta = vec(theta_hat)
    q = _q_for(hyp, theta.size)
    qt = q @ theta
    qsq = q @ np.asarray(sigma_theta, dtype=float) @ q.T
    stat = float(qt @ spd_solve(qsq, qt, label="QΣQᵀ"))
    stat = max(stat, 0.0)
    return stat, noncentral_chisq_sf(stat, hyp.df, 0.0), hyp.df


def noncentrality(theta, sigma, hyp: HypothesisSpec) -> float:
    """``(Qθ)ᵀ (QΣQᵀ)⁻¹ (Qθ)``."""
    theta = vec(theta)
    q = _q_for(hyp, theta.size)
    qt = q @ theta
    return float(qt @ spd_solve(q @ sigma @ q.T, qt, label="QΣ′Qᵀ"))


def alternative_density(p_prime, req: PowerRequest) -> np.ndarray:
    """Density whose expected table is ``n * density`` under the request's scheme."""
    p = np.asarray(getattr(p_prime, "cells", p_prime), dtype=float)
    if req.scheme == "M":
        return p
    if req.scheme == "MR":
        return req.proportions[:, None] * p / p.sum(axis=1)[:, None]
    return req.proportions[None, :] * p / p.sum(axis=0)[None, :]


def build_alternative(req: PowerRequest, mm: ModelMatrices, spec: DesignSpec, n: float | None = None):
    """``(p′, Σ′)``: the joint density for ``θ′`` and the covariance at size ``n``.

    ``n`` defaults to ``req.n`` and then to 1.
    """
    p_prime = ipf_constrained(req.theta_prime, req.row_marg, req.col_marg, mm)
    size = n if n is not None else (req.n if req.n is not None else 1.0)
    density = alternative_density(p_prime, req)
    return p_prime, sigma_theta_kron(size * density, spec)


@dataclass(frozen=True)
class PowerResult:
    power: float
    noncentrality: float
    critical_value: float
    df: int
    alpha: float
    n: float
    p_prime: ContingencyTable
    density: np.ndarray
    sigma: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "power": self.power,
            "noncentrality": self.noncentrality,
            "critical_value": self.critical_value,
            "df": self.df,
            "alpha": self.alpha,
            "n": self.n,
            "p_prime": self.p_prime.cells.tolist(),
            "density": self.density.tolist(),
            "sigma_theta": self.sigma.tolist(),
        }


class _PowerFunction:
    """Power as a function of n for one request; the IPF runs once."""

    def __init__(self, req: PowerRequest, hyp: HypothesisSpec, mm: ModelMatrices, spec: DesignSpec):
        self.req, self.hyp, self.spec = req, hyp, spec
        self.p_prime = ipf_constrained(req.theta_prime, req.row_marg, req.col_marg, mm)
        self.density = alternative_density(self.p_prime, req)
        self.critical = chisq_quantile(1.0 - hyp.alpha, hyp.df)
        _q_for(hyp, req.theta_prime.size)

    def result(self, n: float) -> PowerResult:
        sigma = sigma_theta_kron(n * self.density, self.spec)
        delta = noncentrality(self.req.theta_prime, sigma, self.hyp)
        if delta == 0.0:
            # the critical value is the (1 - alpha) quantile, so the size is alpha
            power = self.hyp.alpha
        else:
            power = noncentral_chisq_sf(self.critical, self.hyp.df, delta)
        return PowerResult(
            power, delta, self.critical, self.hyp.df, self.hyp.alpha, float(n), self.p_prime, self.density, sigma
        )

    def __call__(self, n: float) -> float:
        return self.result(n).power


def power_analysis(req: PowerRequest, hyp: HypothesisSpec, mm: ModelMatrices, spec: DesignSpec) -> PowerResult:
    if req.n is None:
        raise DomainError("power analysis needs the sample size n")
    return _PowerFunction(req, hyp, mm, spec).result(req.n)


def power_at(req: PowerRequest, hyp: HypothesisSpec, mm: ModelMatrices, spec: DesignSpec) -> float:
    """Asymptotic power of the level-α Wald test at sample size ``req.n``."""
    return power_analysis(req, hyp, mm, spec).power


def power_curve(req, hyp, mm, spec, sizes) -> list[PowerResult]:
    fn = _PowerFunction(req, hyp, mm, spec)
    return [fn.result(float(n)) for n in sizes]


def required_sample_size(req: PowerRequest, hyp: HypothesisSpec, mm: ModelMatrices, spec: DesignSpec) -> int:
    """Smallest integer ``n`` with ``power_at(n) >= req.target_power``.

    The noncentrality is linear in ``n``, so the critical noncentrality is
    found once by bisection and the rounded-up size is then checked one step
    in each direction.
    """
    target = req.target_power
    if target is None:
        raise DomainError("sample-size search needs target_power")
    if not hyp.alpha < target < 1.0:
        raise DomainError(f"target power {target} must lie in (alpha, 1) = ({hyp.alpha}, 1)")
    fn = _PowerFunction(req, hyp, mm, spec)
    if np.allclose(hyp.Q @ vec(req.theta_prime), 0.0, atol=0.0):
        raise DomainError("Qθ′ = 0: the alternative lies in the null hypothesis, no n reaches the target power")
    delta_1 = fn.result(1.0).noncentrality

    lo, hi = 0.0, 1.0
    while noncentral_chisq_sf(fn.critical, hyp.df, hi) < target:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if noncentral_chisq_sf(fn.critical, hyp.df, mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    n = max(1, math.ceil(hi / delta_1))
    while fn(n) < target:
        n += 1
    while n > 1 and fn(n - 1) >= target:
        n -= 1
    return int(n)


def _compositions(total: int, parts: int):
    for cuts in itertools.combinations(range(1, total), parts - 1):
        bounds = (0, *cuts, total)
        yield tuple(b - a for a, b in zip(bounds[:-1], bounds[1:]))


def optimal_proportions(req: PowerRequest, hyp: HypothesisSpec, mm: ModelMatrices, spec: DesignSpec, resolution: int = 10):
    """Grid search over subsample proportions (multiples of ``1/resolution``).

    Returns ``(proportions, power)`` maximising power; ties go to the
    lexicographically smallest proportion vector.
    """
    if req.scheme == "M":
        raise DomainError("proportions only apply to schemes MR and MC")
    if req.n is None:
        raise DomainError("proportion search needs the sample size n")
    parts = req.row_marg.size if req.scheme == "MR" else req.col_marg.size
    if resolution < parts:
        raise DomainError(f"resolution must be at least {parts}")
    base = _PowerFunction(req, hyp, mm, spec)
    best, best_power = None, -1.0
    for comp in _compositions(resolution, parts):
        props = np.array(comp, dtype=float) / resolution
        trial = PowerRequest(req.theta_prime, req.row_marg, req.col_marg, req.scheme, props, req.n)
        density = alternative_density(base.p_prime, trial)
        sigma = sigma_theta_kron(req.n * density, spec)
        delta = noncentrality(req.theta_prime, sigma, hyp)
        power = hyp.alpha if delta == 0.0 else noncentral_chisq_sf(base.critical, hyp.df, delta)
        if power > best_power:
            best, best_power = props, power
    return best, best_power
