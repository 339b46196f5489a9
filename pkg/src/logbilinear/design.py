"""Contingency tables, score designs and the structural matrices built from them.

All vectors indexed by table cells use one ordering everywhere: column-major
over ``(j, k)`` with the row index ``j`` running fastest, i.e. cell ``(j, k)``
of a ``(J+1) x (K+1)`` table sits at position ``k * (J + 1) + j``.  This is
the ordering produced by :func:`logbilinear.matkit.vec`, so Kronecker
identities hold without any permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IdentifiabilityError
from .matkit import kron, numerical_rank, vec

SCHEMES = ("M", "P", "MR", "MC")


def cell_index(j: int, k: int, n_rows: int) -> int:
    """Position of cell ``(j, k)`` in a table vector."""
    return k * n_rows + j


@dataclass(frozen=True)
class ContingencyTable:
    """A ``(J+1) x (K+1)`` table of counts or expectations.

    Cell ``(0, 0)`` is the reference cell.
    """

    cells: np.ndarray
    row_labels: tuple[str, ...] | None = None
    col_labels: tuple[str, ...] | None = None
    kind: str = "observed"

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        if cells.ndim != 2:
            raise DomainError("a contingency table must be two-dimensional")
        if cells.shape[0] < 2 or cells.shape[1] < 2:
            raise DomainError(f"a table needs at least 2 rows and 2 columns, got shape {cells.shape}")
        if not np.all(np.isfinite(cells)):
            raise DomainError("table cells must be finite")
        bad = np.argwhere(cells < 0)
        if bad.size:
            j, k = bad[0]
            raise DomainError(f"negative entry {cells[j, k]} in cell ({j}, {k})")
        if self.kind not in ("observed", "expected"):
            raise DomainError(f"unknown table kind {self.kind!r}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        for name, size in (("row_labels", cells.shape[0]), ("col_labels", cells.shape[1])):
            labels = getattr(self, name)
            if labels is not None:
                labels = tuple(str(s) for s in labels)
                if len(labels) != size:
                    raise DomainError(f"{name} has {len(labels)} entries, table has {size}")
                object.__setattr__(self, name, labels)

    @property
    def J(self) -> int:
        return self.cells.shape[0] - 1

    @property
    def K(self) -> int:
        return self.cells.shape[1] - 1

    @property
    def I(self) -> int:  # noqa: E743
        return self.cells.size

    @property
    def total(self) -> float:
        return float(self.cells.sum())

    @property
    def row_totals(self) -> np.ndarray:
        return self.cells.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.cells.sum(axis=0)

    def vector(self) -> np.ndarray:
        return vec(self.cells)

    def transpose(self) -> "ContingencyTable":
        return ContingencyTable(self.cells.T, self.col_labels, self.row_labels, self.kind)

    @classmethod
    def from_vector(cls, v, n_rows: int, n_cols: int, kind: str = "expected") -> "ContingencyTable":
        return cls(np.asarray(v, dtype=float).reshape((n_rows, n_cols), order="F"), kind=kind)


@dataclass(frozen=True)
class DesignSpec:
    """Row scores ``xtilde`` (J x L_X) and column scores ``ytilde`` (K x L_Y).

    Scores for the reference row and column are zero by construction and are
    not stored.
    """

    xtilde: np.ndarray
    ytilde: np.ndarray

    def __post_init__(self):
        for name in ("xtilde", "ytilde"):
            a = np.array(getattr(self, name), dtype=float)
            if a.ndim == 1:
                a = a[:, None]
            if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
                raise DomainError(f"{name} must be a non-empty matrix, got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise DomainError(f"{name} has non-finite entries")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def J(self) -> int:
        return self.xtilde.shape[0]

    @property
    def K(self) -> int:
        return self.ytilde.shape[0]

    @property
    def L_X(self) -> int:
        return self.xtilde.shape[1]

    @property
    def L_Y(self) -> int:
        return self.ytilde.shape[1]

    @property
    def L(self) -> int:
        return self.L_X * self.L_Y

    def transpose(self) -> "DesignSpec":
        """Design for the transposed table (rows and columns swapped)."""
        return DesignSpec(self.ytilde, self.xtilde)

    @classmethod
    def saturated(cls, J: int, K: int) -> "DesignSpec":
        return cls(np.eye(J), np.eye(K))

    @classmethod
    def linear_by_linear(cls, J: int, K: int) -> "DesignSpec":
        """Equally spaced scalar scores ``1..J`` and ``1..K``."""
        return cls(np.arange(1.0, J + 1)[:, None], np.arange(1.0, K + 1)[:, None])


@dataclass(frozen=True)
class ModelMatrices:
    """Structural matrices of a log-linear association model.

    ``Z`` is I x L with zero rows for the reference row and column; ``Zcirc``
    keeps the rows with ``j, k > 0``.  ``C`` holds the log cross-ratio
    contrasts, ``B`` the column-parameter contrasts ``e_0k - e_00``, ``E`` the
    column indicators for ``k >= 1``, ``G`` all column indicators, ``F`` all
    row indicators and ``Hbasis`` a basis of the model space.
    """

    n_rows: int
    n_cols: int
    Z: np.ndarray
    Zcirc: np.ndarray
    C: np.ndarray
    B: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    Hbasis: np.ndarray
    design: DesignSpec | None = field(default=None, compare=False)

    @property
    def J(self) -> int:
        return self.n_rows - 1

    @property
    def K(self) -> int:
        return self.n_cols - 1

    @property
    def I(self) -> int:  # noqa: E743
        return self.n_rows * self.n_cols

    @property
    def L(self) -> int:
        return self.Z.shape[1]

    @property
    def theta_shape(self) -> tuple[int, int]:
        if self.design is None:
            return (self.L, 1)
        return (self.design.L_X, self.design.L_Y)

    @property
    def marginal_basis(self) -> np.ndarray:
        """Intercept plus row and column indicators (the first columns of Hbasis)."""
        return self.Hbasis[:, : 1 + self.J + self.K]


def _unit(n_rows: int, n_cols: int, j: int, k: int) -> np.ndarray:
    e = np.zeros(n_rows * n_cols)
    e[cell_index(j, k, n_rows)] = 1.0
    return e


def contrast_matrix(J: int, K: int) -> np.ndarray:
    """I x JK matrix with columns ``e_jk + e_00 - e_j0 - e_0k`` for ``j, k > 0``."""
    n_rows, n_cols = J + 1, K + 1
    c = np.zeros((n_rows * n_cols, J * K))
    for k in range(1, n_cols):
        for j in range(1, n_rows):
            col = (k - 1) * J + (j - 1)
            c[cell_index(j, k, n_rows), col] += 1.0
            c[cell_index(0, 0, n_rows), col] += 1.0
            c[cell_index(j, 0, n_rows), col] -= 1.0
            c[cell_index(0, k, n_rows), col] -= 1.0
    return c


def row_indicators(J: int, K: int) -> np.ndarray:
    """I x (J+1) matrix whose column ``j`` is ``e_{j+}``."""
    return np.kron(np.ones((K + 1, 1)), np.eye(J + 1))


def col_indicators(J: int, K: int) -> np.ndarray:
    """I x (K+1) matrix whose column ``k`` is ``e_{+k}``."""
    return np.kron(np.eye(K + 1), np.ones((J + 1, 1)))


def _assemble(n_rows: int, n_cols: int, z: np.ndarray, design: DesignSpec | None) -> ModelMatrices:
    J, K = n_rows - 1, n_cols - 1
    c = contrast_matrix(J, K)
    b = np.zeros((n_rows * n_cols, K))
    for k in range(1, n_cols):
        b[:, k - 1] = _unit(n_rows, n_cols, 0, k) - _unit(n_rows, n_cols, 0, 0)
    f = row_indicators(J, K)
    g = col_indicators(J, K)
    e = g[:, 1:]
    h = np.hstack([np.ones((n_rows * n_cols, 1)), f[:, 1:], e, z])
    inner = [cell_index(j, k, n_rows) for k in range(1, n_cols) for j in range(1, n_rows)]
    mats = dict(Z=z, Zcirc=z[inner], C=c, B=b, E=e, F=f, G=g, Hbasis=h)
    for a in mats.values():
        a.setflags(write=False)
    return ModelMatrices(n_rows=n_rows, n_cols=n_cols, design=design, **mats)


def _full_scores(scores: np.ndarray) -> np.ndarray:
    return np.vstack([np.zeros((1, scores.shape[1])), scores])


def build_model_matrices(spec: DesignSpec) -> ModelMatrices:
    """All structural matrices for the log-bilinear design ``spec``.

    Raises :class:`IdentifiabilityError` naming the rank-deficient score
    matrix.
    """
    for name, scores in (("xtilde", spec.xtilde), ("ytilde", spec.ytilde)):
        r = numerical_rank(scores)
        if r < scores.shape[1]:
            raise IdentifiabilityError(
                f"{name} has rank {r} but {scores.shape[1]} columns; theta is not identifiable",
                factor=name,
            )
    z = kron(_full_scores(spec.ytilde), _full_scores(spec.xtilde))
    return _assemble(spec.J + 1, spec.K + 1, z, spec)


def model_matrices_from_z(z, n_rows: int, n_cols: int) -> ModelMatrices:
    """Structural matrices for an arbitrary interaction covariate matrix ``z``.

    ``z`` is I x L in table-vector order and must vanish on the reference
    row and column.  This covers log-linear association models whose
    covariates are not of Kronecker form.
    """
    z = np.array(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] != n_rows * n_cols:
        raise DomainError(f"z has {z.shape[0]} rows, expected {n_rows * n_cols}")
    ref = [cell_index(j, 0, n_rows) for j in range(n_rows)] + [cell_index(0, k, n_rows) for k in range(n_cols)]
    if np.any(z[ref] != 0):
        raise DomainError("z must be zero on the reference row and column")
    mm = _assemble(n_rows, n_cols, z, None)
    r = numerical_rank(mm.Zcirc)
    if r < z.shape[1]:
        raise IdentifiabilityError(f"z has rank {r} < {z.shape[1]} columns", factor="Z")
    return mm


@dataclass(frozen=True)
class IdentifiabilityReport:
    passed: bool
    ranks: dict
    expected: dict
    failures: tuple[str, ...]

    @property
    def rank_tuple(self) -> tuple[int, int, int, int]:
        return tuple(self.ranks[k] for k in ("xtilde", "ytilde", "Z", "Hbasis"))

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "ranks": dict(self.ranks),
            "expected": dict(self.expected),
            "failures": list(self.failures),
        }


def check_identifiability(spec: DesignSpec, table: ContingencyTable | None = None) -> IdentifiabilityReport:
    """Numerical ranks of the scores, of Z and of the model-space basis.

    Never raises for rank problems; the report carries pass/fail.
    """
    z = kron(_full_scores(spec.ytilde), _full_scores(spec.xtilde))
    mm = _assemble(spec.J + 1, spec.K + 1, z, spec)
    ranks = {
        "xtilde": numerical_rank(spec.xtilde),
        "ytilde": numerical_rank(spec.ytilde),
        "Z": numerical_rank(mm.Z),
        "Hbasis": numerical_rank(mm.Hbasis),
    }
    expected = {
        "xtilde": spec.L_X,
        "ytilde": spec.L_Y,
        "Z": spec.L,
        "Hbasis": mm.Hbasis.shape[1],
    }
    failures = [f"{k}: rank {ranks[k]} < {expected[k]}" for k in ranks if ranks[k] < expected[k]]
    if table is not None and table.cells.shape != (spec.J + 1, spec.K + 1):
        failures.append(
            f"table shape {table.cells.shape} does not match design shape {(spec.J + 1, spec.K + 1)}"
        )
    return IdentifiabilityReport(not failures, ranks, expected, tuple(failures))


@dataclass(frozen=True)
class SchemeSpec:
    """Sampling scheme and its size parameters.

    ``M``: fixed grand total ``total_n``; ``P``: Poisson with mean total
    ``nu``; ``MR``: fixed row totals ``row_sizes``; ``MC``: fixed column
    totals ``col_sizes``.
    """

    scheme: str
    total_n: float | None = None
    nu: float | None = None
    row_sizes: np.ndarray | None = None
    col_sizes: np.ndarray | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown sampling scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.scheme == "M" and not (self.total_n is not None and self.total_n > 0):
            raise DomainError("scheme M needs a positive total_n")
        if self.scheme == "P" and not (self.nu is not None and self.nu > 0):
            raise DomainError("scheme P needs a positive nu")
        for name, active in (("row_sizes", "MR"), ("col_sizes", "MC")):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=float).ravel()
                v.setflags(write=False)
                object.__setattr__(self, name, v)
            if self.scheme == active:
                if v is None or v.size < 2:
                    raise DomainError(f"scheme {active} needs {name} with one entry per level")
                # zero-sized subsamples are allowed; they produce empty rows/columns
                if np.any(v < 0) or not np.all(np.isfinite(v)) or v.sum() <= 0:
                    raise DomainError(f"{name} must be nonnegative with a positive total")

    @classmethod
    def multinomial(cls, n: float) -> "SchemeSpec":
        return cls("M", total_n=float(n))

    @classmethod
    def poisson(cls, nu: float) -> "SchemeSpec":
        return cls("P", nu=float(nu))

    @classmethod
    def rows(cls, sizes) -> "SchemeSpec":
        return cls("MR", row_sizes=sizes)

    @classmethod
    def cols(cls, sizes) -> "SchemeSpec":
        return cls("MC", col_sizes=sizes)

    @classmethod
    def matching(cls, scheme: str, table: ContingencyTable) -> "SchemeSpec":
        """Scheme whose fixed quantities agree with the observed ``table``."""
        if scheme == "M":
            return cls.multinomial(table.total)
        if scheme == "P":
            return cls.poisson(table.total)
        if scheme == "MR":
            return cls.rows(table.row_totals)
        if scheme == "MC":
            return cls.cols(table.col_totals)
        raise DomainError(f"unknown sampling scheme {scheme!r}")

    @property
    def total(self) -> float:
        if self.scheme == "M":
            return float(self.total_n)
        if self.scheme == "P":
            return float(self.nu)
        if self.scheme == "MR":
            return float(self.row_sizes.sum())
        return float(self.col_sizes.sum())

    def to_dict(self) -> dict:
        out = {"scheme": self.scheme}
        if self.total_n is not None:
            out["total_n"] = float(self.total_n)
        if self.nu is not None:
            out["nu"] = float(self.nu)
        if self.row_sizes is not None:
            out["row_sizes"] = self.row_sizes.tolist()
        if self.col_sizes is not None:
            out["col_sizes"] = self.col_sizes.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SchemeSpec":
        return cls(
            d["scheme"],
            total_n=d.get("total_n"),
            nu=d.get("nu"),
            row_sizes=d.get("row_sizes"),
            col_sizes=d.get("col_sizes"),
        )
