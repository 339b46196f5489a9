"""Dense linear algebra used throughout the package.

Weighted (D-orthogonal) projections, Kronecker products, column-stacking
vectorisation and block inversion.  Everything here is a pure function of
its arguments.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import (
    DomainError,
    IllConditionedWarning,
    SingularBasisError,
    SingularBlockError,
    SingularMatrixError,
)

DEFAULT_ATOL = 1e-10
COND_WARN = 1e12


def kron(a, b) -> np.ndarray:
    """Kronecker product ``a ⊗ b``: block ``(i, j)`` equals ``a[i, j] * b``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    m, n = a.shape
    p, q = b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(m * p, n * q)


def vec(a) -> np.ndarray:
    """Stack the columns of ``a`` into one vector."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return a.copy()
    return a.reshape(-1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v, dtype=float).reshape((rows, cols), order="F")


def numerical_rank(a, tol: float | None = None) -> int:
    """Number of singular values above ``max(shape) * eps * sigma_max``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if tol is None:
        tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return int(np.sum(s > tol))


def _check_cond(a: np.ndarray, label: str) -> None:
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_WARN:
        warnings.warn(
            f"{label}: condition number {cond:.3g} exceeds {COND_WARN:.0e}",
            IllConditionedWarning,
            stacklevel=3,
        )


def spd_solve(a, b, label: str = "matrix") -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive-definite ``a`` via Cholesky."""
    a = np.asarray(a, dtype=float)
    a = 0.5 * (a + a.T)
    _check_cond(a, label)
    try:
        factor = linalg.cho_factor(a, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SingularMatrixError(f"{label} is not positive definite: {exc}") from exc
    return linalg.cho_solve(factor, np.asarray(b, dtype=float))


def spd_inverse(a, label: str = "matrix") -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix, symmetrised."""
    a = np.asarray(a, dtype=float)
    inv = spd_solve(a, np.eye(a.shape[0]), label=label)
    return 0.5 * (inv + inv.T)


def left_inverse(a) -> np.ndarray:
    """``(aᵀa)⁻¹aᵀ`` for a matrix of full column rank."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    r = numerical_rank(a)
    if r < a.shape[1]:
        raise SingularBasisError(
            f"left inverse needs full column rank {a.shape[1]}, found rank {r}",
            rank=r,
            columns=a.shape[1],
        )
    return spd_solve(a.T @ a, a.T, label="AᵀA")


@dataclass(frozen=True)
class ProjectionMatrix:
    """D-orthogonal projection onto the column space of ``basis``."""

    P: np.ndarray
    basis: np.ndarray
    weights: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def complement(self) -> np.ndarray:
        """Projection onto the D-orthogonal complement, ``I - P``."""
        return np.eye(self.P.shape[0]) - self.P

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.P, dtype=dtype)


def d_projection(basis, d) -> ProjectionMatrix:
    """Projection ``X (XᵀDX)⁻¹ XᵀD`` with ``D = diag(d)``.

    A basis with zero columns yields the zero projection.  Raises
    :class:`SingularBasisError` when ``basis`` is rank deficient.
    """
    d = np.asarray(d, dtype=float).ravel()
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise DomainError("projection weights must be finite and strictly positive")
    x = np.asarray(basis, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != d.size:
        raise DomainError(f"basis has {x.shape[0]} rows but {d.size} weights were given")
    n_rows, m = x.shape
    if m == 0:
        return ProjectionMatrix(np.zeros((n_rows, n_rows)), x, d)
    r = numerical_rank(x)
    if r < m:
        raise SingularBasisError(
            f"projection basis has numerical rank {r} < {m} columns", rank=r, columns=m
        )
    xtd = x.T * d
    coef = spd_solve(xtd @ x, xtd, label="XᵀDX")
    return ProjectionMatrix(x @ coef, x, d)


def partitioned_inverse(l_blk, m_blk, g_blk, h_blk):
    """Blocks of the inverse of ``[[L, M], [G, H]]``.

    Returns ``(L⁻¹ + L⁻¹MN⁻¹GL⁻¹, -L⁻¹MN⁻¹, -N⁻¹GL⁻¹, N⁻¹)`` with the Schur
    complement ``N = H - G L⁻¹ M``.
    """
    l_blk = np.atleast_2d(np.asarray(l_blk, dtype=float))
    m_blk = np.atleast_2d(np.asarray(m_blk, dtype=float))
    g_blk = np.atleast_2d(np.asarray(g_blk, dtype=float))
    h_blk = np.atleast_2d(np.asarray(h_blk, dtype=float))
    a, b = l_blk.shape[0], h_blk.shape[0]
    if l_blk.shape != (a, a) or h_blk.shape != (b, b) or m_blk.shape != (a, b) or g_blk.shape != (b, a):
        raise DomainError("partitioned_inverse: block shapes do not conform")

    if numerical_rank(l_blk) < a:
        raise SingularBlockError("leading block L is singular", block="L")
    l_inv = np.linalg.solve(l_blk, np.eye(a))
    n_blk = h_blk - g_blk @ l_inv @ m_blk
    if numerical_rank(n_blk) < b:
        raise SingularBlockError("Schur complement N = H - G L⁻¹ M is singular", block="N")
    n_inv = np.linalg.solve(n_blk, np.eye(b))

    upper_right = -l_inv @ m_blk @ n_inv
    lower_left = -n_inv @ g_blk @ l_inv
    upper_left = l_inv + l_inv @ m_blk @ n_inv @ g_blk @ l_inv
    return upper_left, upper_right, lower_left, n_inv


def assemble_blocks(upper_left, upper_right, lower_left, lower_right) -> np.ndarray:
    return np.block([[upper_left, upper_right], [lower_left, lower_right]])
