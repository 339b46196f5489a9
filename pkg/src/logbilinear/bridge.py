"""Conversions between regression coefficients and the odds-ratio parameter.

For univariate linear regression with constant conditional variance the
odds-ratio parameter is ``θ = β / σ²`` with ``σ² = σ_Y² - βᵀ Cov(x̃) β``;
for multivariate regression ``θ = β Σ⁻¹`` with ``Σ = Cov(Y) - βᵀ Cov(x̃) β``;
for Poisson log-linear regression ``θ = β``.  In a GLM with canonical link
and dispersion φ the relation is ``θ = β / φ``; φ itself is not estimated
here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .matkit import spd_solve


def _cov_matrix(cov, size: int, name: str) -> np.ndarray:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape != (size, size):
        raise DomainError(f"{name} must be {size} x {size}, got {cov.shape}")
    if not np.allclose(cov, cov.T) or np.linalg.eigvalsh(0.5 * (cov + cov.T))[0] <= 0:
        raise DomainError(f"{name} must be symmetric positive definite")
    return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class LinearBridgeInput:
    beta: np.ndarray
    sigma_y2: float
    cov_x: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).ravel()
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "cov_x", _cov_matrix(self.cov_x, beta.size, "cov_x"))
        if not self.sigma_y2 > 0:
            raise DomainError("sigma_y2 must be positive")

    @property
    def conditional_variance(self) -> float:
        return float(self.sigma_y2 - self.beta @ self.cov_x @ self.beta)


def theta_from_beta_linear(inp: LinearBridgeInput) -> np.ndarray:
    sigma2 = inp.conditional_variance
    if not sigma2 > 0:
        raise DomainError(
            f"conditional variance sigma_y2 - βᵀCov(x̃)β = {sigma2:.6g} must be positive"
        )
    return inp.beta / sigma2


def f_norm(u, sigma_y2: float):
    """``u / (σ_Y² - u²)``, increasing on ``[0, σ_Y)``."""
    u = np.asarray(u, dtype=float)
    return u / (sigma_y2 - u * u)


def f_inverse(v, sigma_y2: float):
    """Root in ``[0, σ_Y)`` of ``v u² + u - v σ_Y² = 0``."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise DomainError("f_inverse is defined for v >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        # rationalised form of (-1 + sqrt(1 + 4 v² σ²)) / (2v); no cancellation for small v
        u = 2.0 * v * sigma_y2 / (1.0 + np.sqrt(1.0 + 4.0 * v * v * sigma_y2))
    return np.where(v == 0, 0.0, u)


def beta_from_theta_linear(theta, sigma_y2: float, cov_x) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    if not sigma_y2 > 0:
        raise DomainError("sigma_y2 must be positive")
    cov_x = _cov_matrix(cov_x, theta.size, "cov_x")
    norm = float(np.sqrt(max(theta @ cov_x @ theta, 0.0)))
    if norm == 0.0:
        return sigma_y2 * theta
    u = float(f_inverse(norm, sigma_y2))
    # σ_Y² - u² equals u / v at the root; the quotient avoids cancellation
    return (u / norm) * theta


def theta_from_beta_mvlinear(beta, cov_y, cov_x) -> np.ndarray:
    """``θ = β [Cov(Y) - βᵀ Cov(x̃) β]⁻¹`` for an L_X x L_Y coefficient matrix."""
    beta = np.atleast_2d(np.asarray(beta, dtype=float))
    l_x, l_y = beta.shape
    cov_y = _cov_matrix(cov_y, l_y, "cov_y")
    cov_x = _cov_matrix(cov_x, l_x, "cov_x")
    sigma = cov_y - beta.T @ cov_x @ beta
    sigma = 0.5 * (sigma + sigma.T)
    smallest = np.linalg.eigvalsh(sigma)[0]
    if not smallest > 0:
        raise DomainError(f"Cov(Y) - βᵀCov(x̃)β is not positive definite (eigenvalue {smallest:.6g})")
    return spd_solve(sigma, beta.T, label="conditional covariance").T


def beta_from_theta_loglinear(theta) -> np.ndarray:
    """Poisson log-linear regression: the coefficients equal θ."""
    return np.array(theta, dtype=float)


def theta_from_beta_glm(beta, phi: float) -> np.ndarray:
    """Canonical-link GLM with known dispersion ``phi``: ``θ = β / φ``."""
    if not phi > 0:
        raise DomainError("dispersion phi must be positive")
    return np.asarray(beta, dtype=float) / phi
