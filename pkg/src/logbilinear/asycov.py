"""Asymptotic covariance of the odds-ratio parameter estimator.

The covariance of ``vec θ̂`` is computed along five independent routes:

``projection``
    ``Z°⁻ Cᵀ P_H D⁻¹ C Z°⁻ᵀ`` with the D-orthogonal projection onto the
    model space.
``explicit``
    ``(Z°ᵀ (CᵀD⁻¹C)⁻¹ Z°)⁻¹`` with ``CᵀD⁻¹C`` filled entry by entry.
``mr``
    ``[ZᵀWZ - ZᵀWE (EᵀWE)⁻¹ EᵀWZ]⁻¹`` with ``W`` the covariance of the
    table under row-multinomial sampling.
``kron``
    The explicit form with ``Z° = Ỹ° ⊗ X̃°`` rebuilt from the scores.
``score``
    The θθ block of the inverse score covariance of the row-conditional
    (multivariate logistic) likelihood.

The routes share nothing beyond ``D = diag(μ)`` and the model matrices, so
agreement between them is a real check.  ``D`` may be the fitted table
(estimated covariance) or a theoretical expectation (power analysis).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .design import DesignSpec, ModelMatrices, SchemeSpec, contrast_matrix
from .errors import DomainError, LogBilinearError, RouteError, SingularMatrixError
from .fit import FitResult
from .matkit import d_projection, kron, left_inverse, spd_inverse, spd_solve, unvec, vec

ROUTES = ("projection", "explicit", "mr", "kron", "score")
AGREEMENT_TOL = 1e-8


def _mu_table(mu, n_rows: int | None = None, n_cols: int | None = None) -> np.ndarray:
    m = np.asarray(getattr(mu, "cells", mu), dtype=float)
    if m.ndim == 1:
        if n_rows is None or n_cols is None:
            raise DomainError("a cell vector needs the table shape")
        m = unvec(m, n_rows, n_cols)
    if np.any(~np.isfinite(m)) or np.any(m <= 0):
        bad = np.argwhere(~(m > 0))
        where = f" at cell {tuple(int(i) for i in bad[0])}" if bad.size else ""
        raise DomainError(f"expected table must be strictly positive{where}")
    return np.ascontiguousarray(m)


def _mu_for(mu, mm: ModelMatrices) -> np.ndarray:
    m = _mu_table(mu, mm.n_rows, mm.n_cols)
    if m.shape != (mm.n_rows, mm.n_cols):
        raise DomainError(f"table shape {m.shape} does not match design {(mm.n_rows, mm.n_cols)}")
    return m


def _scheme_name(scheme) -> str:
    name = scheme.scheme if isinstance(scheme, SchemeSpec) else str(scheme)
    if name not in ("M", "P", "MR", "MC"):
        raise DomainError(f"unknown sampling scheme {name!r}")
    return name


def scheme_basis(scheme, mm: ModelMatrices) -> np.ndarray:
    """Basis of the subspace fixed by the sampling design.

    Constants for M, nothing for P, row indicators for MR and column
    indicators for MC.
    """
    name = _scheme_name(scheme)
    if name == "M":
        return np.ones((mm.I, 1))
    if name == "P":
        return np.zeros((mm.I, 0))
    if name == "MR":
        return np.asarray(mm.F)
    return np.asarray(mm.G)


def sigma_eta_mu(mu, mm: ModelMatrices, scheme):
    """``(Σ_μ̂, Σ_η̂) = (D[P_H - P_N], [P_H - P_N]D⁻¹)`` for the given scheme."""
    m = vec(_mu_for(mu, mm))
    p_h = d_projection(mm.Hbasis, m).P
    p_n = d_projection(scheme_basis(scheme, mm), m).P
    diff = p_h - p_n
    sigma_mu = m[:, None] * diff
    sigma_eta = diff / m[None, :]
    return 0.5 * (sigma_mu + sigma_mu.T), 0.5 * (sigma_eta + sigma_eta.T)


def lambda_map(mm: ModelMatrices) -> np.ndarray:
    """The (K+L) x I linear map ``η ↦ (Bᵀη, Z°⁻Cᵀη)``."""
    return np.vstack([mm.B.T, left_inverse(mm.Zcirc) @ mm.C.T])


def sigma_lambda(mu, mm: ModelMatrices, scheme) -> np.ndarray:
    """Covariance of ``(γ̂°, vec θ̂)``; blocks ordered γ° first, then θ."""
    _, sigma_eta = sigma_eta_mu(mu, mm, scheme)
    a = lambda_map(mm)
    out = a @ sigma_eta @ a.T
    return 0.5 * (out + out.T)


def sigma_theta_projection(mu, mm: ModelMatrices) -> np.ndarray:
    m = vec(_mu_for(mu, mm))
    p_h = d_projection(mm.Hbasis, m).P
    zl = left_inverse(mm.Zcirc)
    core = mm.C.T @ (p_h / m[None, :]) @ mm.C
    out = zl @ core @ zl.T
    return 0.5 * (out + out.T)


def ctdc_matrix(mu) -> np.ndarray:
    """``CᵀD⁻¹C`` (JK x JK) from the cell-level reciprocal formulas."""
    return kernels.ctdc(_mu_table(mu))


def sigma_theta_explicit(mu, mm: ModelMatrices) -> np.ndarray:
    m = _mu_for(mu, mm)
    inner = ctdc_matrix(m)
    zc = np.asarray(mm.Zcirc)
    info = zc.T @ spd_solve(inner, zc, label="CᵀD⁻¹C")
    return spd_inverse(info, label="Z°ᵀ(CᵀD⁻¹C)⁻¹Z°")


def mr_covariance(mu) -> np.ndarray:
    """Covariance of the table vector under row-multinomial sampling."""
    return kernels.mr_covariance(_mu_table(mu))


def sigma_theta_mr(mu, mm: ModelMatrices) -> np.ndarray:
    m = _mu_for(mu, mm)
    w = mr_covariance(m)
    z, e = np.asarray(mm.Z), np.asarray(mm.E)
    ewe = e.T @ w @ e
    ewz = e.T @ w @ z
    info = z.T @ w @ z - ewz.T @ spd_solve(ewe, ewz, label="EᵀWE")
    return spd_inverse(info, label="MR information")


def sigma_theta_kron(mu, spec: DesignSpec) -> np.ndarray:
    """Explicit form with ``Z° = Ỹ° ⊗ X̃°`` taken straight from the scores."""
    m = _mu_table(mu)
    if m.shape != (spec.J + 1, spec.K + 1):
        raise DomainError(f"table shape {m.shape} does not match design {(spec.J + 1, spec.K + 1)}")
    zk = kron(spec.ytilde, spec.xtilde)
    c = contrast_matrix(spec.J, spec.K)
    ctdc = c.T @ (c / vec(m)[:, None])
    info = zk.T @ spd_solve(ctdc, zk, label="CᵀD⁻¹C")
    return spd_inverse(info, label="(Ỹ°ᵀ⊗X̃°ᵀ)(CᵀD⁻¹C)⁻¹(Ỹ°⊗X̃°)")


def score_information(mu, mm: ModelMatrices) -> np.ndarray:
    """Covariance of the row-conditional score vector for ``(γ°, vec θ)``."""
    m = _mu_for(mu, mm)
    w = mr_covariance(m)
    ez = np.hstack([mm.E, mm.Z])
    out = ez.T @ w @ ez
    return 0.5 * (out + out.T)


def sigma_theta_score(mu, mm: ModelMatrices) -> np.ndarray:
    info_inv = spd_inverse(score_information(mu, mm), label="score information")
    return info_inv[mm.K :, mm.K :]


@dataclass(frozen=True)
class CovarianceBundle:
    """Every representation of the covariance of ``vec θ̂`` plus related matrices."""

    sigma_theta_projection: np.ndarray
    sigma_theta_explicit: np.ndarray
    sigma_theta_mr: np.ndarray
    sigma_theta_kron: np.ndarray
    sigma_theta_score: np.ndarray
    sigma_lambda: np.ndarray
    sigma_eta: np.ndarray
    sigma_mu: np.ndarray
    score_information: np.ndarray
    scheme_used_for_eta: SchemeSpec | str
    max_pairwise_deviation: float

    def routes(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, f"sigma_theta_{name}") for name in ROUTES}

    @property
    def sigma_theta(self) -> np.ndarray:
        return self.sigma_theta_projection

    def to_dict(self) -> dict:
        scheme = self.scheme_used_for_eta
        return {
            "sigma_theta": {name: m.tolist() for name, m in self.routes().items()},
            "sigma_lambda": self.sigma_lambda.tolist(),
            "score_information": self.score_information.tolist(),
            "sigma_eta": self.sigma_eta.tolist(),
            "sigma_mu": self.sigma_mu.tolist(),
            "scheme": scheme.to_dict() if isinstance(scheme, SchemeSpec) else {"scheme": scheme},
            "max_pairwise_deviation": float(self.max_pairwise_deviation),
        }


def max_pairwise_deviation(matrices: dict[str, np.ndarray], reference: str = "projection") -> float:
    """Largest entrywise ``|A - B| / max(1, |ref|)`` over all pairs of matrices."""
    scale = np.maximum(1.0, np.abs(matrices[reference]))
    worst = 0.0
    for a, b in itertools.combinations(matrices.values(), 2):
        worst = max(worst, float(np.max(np.abs(a - b) / scale)))
    return worst


def _check_spd(name: str, m: np.ndarray) -> None:
    if not np.allclose(m, m.T, rtol=0, atol=1e-10 * max(1.0, np.max(np.abs(m)))):
        raise SingularMatrixError(f"route {name}: covariance is not symmetric")
    smallest = np.linalg.eigvalsh(0.5 * (m + m.T))[0]
    if not smallest > 0:
        raise SingularMatrixError(f"route {name}: covariance is not positive definite (eigenvalue {smallest:.3g})")


def covariance_bundle(
    fit: FitResult | object,
    mm: ModelMatrices,
    spec: DesignSpec | None = None,
    scheme: SchemeSpec | str = "M",
) -> CovarianceBundle:
    """All five covariance routes evaluated at the fitted (or given) table.

    ``fit`` is a :class:`FitResult` or anything accepted as an expected
    table.  The scheme only affects ``sigma_eta``/``sigma_mu`` and the γ°
    blocks of ``sigma_lambda``.
    """
    mu = fit.mu_hat if isinstance(fit, FitResult) else fit
    spec = spec if spec is not None else mm.design
    if spec is None:
        raise DomainError("the Kronecker route needs a bilinear DesignSpec")
    m = _mu_for(mu, mm)

    calls = {
        "projection": lambda: sigma_theta_projection(m, mm),
        "explicit": lambda: sigma_theta_explicit(m, mm),
        "mr": lambda: sigma_theta_mr(m, mm),
        "kron": lambda: sigma_theta_kron(m, spec),
        "score": lambda: sigma_theta_score(m, mm),
    }
    results = {}
    for name, call in calls.items():
        try:
            results[name] = call()
            _check_spd(name, results[name])
        except LogBilinearError as exc:
            raise RouteError(name, exc) from exc
        except np.linalg.LinAlgError as exc:
            raise RouteError(name, exc) from exc

    deviation = max_pairwise_deviation(results)
    if deviation > AGREEMENT_TOL:
        warnings.warn(
            f"covariance routes disagree by {deviation:.3g} (tolerance {AGREEMENT_TOL:.0e}); "
            "the expected table is probably ill-conditioned",
            RuntimeWarning,
            stacklevel=2,
        )
    sigma_mu, sigma_eta = sigma_eta_mu(m, mm, scheme)
    return CovarianceBundle(
        sigma_theta_projection=results["projection"],
        sigma_theta_explicit=results["explicit"],
        sigma_theta_mr=results["mr"],
        sigma_theta_kron=results["kron"],
        sigma_theta_score=results["score"],
        sigma_lambda=sigma_lambda(m, mm, scheme),
        sigma_eta=sigma_eta,
        sigma_mu=sigma_mu,
        score_information=score_information(m, mm),
        scheme_used_for_eta=scheme,
        max_pairwise_deviation=deviation,
    )
