"""Readers for the on-disk input formats and stable writers for results.

Formats (all structured files are JSON and carry ``schema_version``):

table CSV
    First row: a corner cell followed by the column labels.  Every other
    row: the row label followed by the counts.  The first row and first
    column of the counts hold the reference levels.
design
    Either reference-relative scores ``{"xtilde": [[...]], "ytilde": [[...]]}``
    (J x L_X and K x L_Y), raw scores for every level
    ``{"x_scores": [[...]], "y_scores": [[...]]}`` from which the reference
    row is subtracted, or ``{"model": "saturated", "shape": [J+1, K+1]}``.
hypothesis
    ``{"Q": [[...]], "alpha": 0.05}``; ``alpha`` is optional.
theta-prime
    ``{"theta": [[...]]}`` with shape L_X x L_Y.
marginals
    ``{"row": [...], "col": [...], "proportions": [...]}``; proportions
    are needed for the MR and MC schemes only.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .design import ContingencyTable, DesignSpec
from .errors import DomainError

SCHEMA_VERSION = 1
SIGNIFICANT_DIGITS = 12


class InputFileError(DomainError):
    """An input file is missing or cannot be parsed."""

    def __init__(self, message: str, path: str | Path, missing: bool = False):
        super().__init__(f"{path}: {message}")
        self.path = str(path)
        self.missing = missing


def _read_text(path) -> str:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InputFileError("file not found", path, missing=True) from None
    except OSError as exc:
        raise InputFileError(str(exc), path, missing=True) from None


def read_json(path) -> dict:
    try:
        data = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise InputFileError(f"invalid JSON ({exc.msg} at line {exc.lineno})", path) from None
    if not isinstance(data, dict):
        raise InputFileError("expected a JSON object", path)
    version = data.get("schema_version")
    if version is None:
        raise InputFileError("missing schema_version", path)
    if version != SCHEMA_VERSION:
        raise InputFileError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})", path)
    return data


def _matrix(value, name: str, path) -> np.ndarray:
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise InputFileError(f"{name} must be a numeric matrix", path) from None
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InputFileError(f"{name} must be a matrix", path)
    return a


def read_table(path) -> ContingencyTable:
    rows = list(csv.reader(_io.StringIO(_read_text(path))))
    rows = [r for r in rows if any(c.strip() for c in r)]
    if len(rows) < 3:
        raise InputFileError("a table needs a header row and at least two data rows", path)
    header = [c.strip() for c in rows[0]]
    col_labels = header[1:]
    row_labels, cells = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputFileError(f"line {line_no} has {len(row)} fields, header has {len(header)}", path)
        row_labels.append(row[0].strip())
        try:
            cells.append([float(c) for c in row[1:]])
        except ValueError:
            raise InputFileError(f"line {line_no} has a non-numeric count", path) from None
    return ContingencyTable(np.array(cells), tuple(row_labels), tuple(col_labels))


@dataclass(frozen=True)
class DesignFile:
    """A parsed design: either fixed reference-relative scores or per-level scores."""

    kind: str
    xtilde: np.ndarray | None = None
    ytilde: np.ndarray | None = None
    x_scores: np.ndarray | None = None
    y_scores: np.ndarray | None = None
    shape: tuple[int, int] | None = None

    @property
    def table_shape(self) -> tuple[int, int]:
        if self.kind == "relative":
            return self.xtilde.shape[0] + 1, self.ytilde.shape[0] + 1
        if self.kind == "scores":
            return self.x_scores.shape[0], self.y_scores.shape[0]
        return self.shape

    def spec(self, row_order=None, col_order=None) -> DesignSpec:
        """Design for the levels taken in the given order (reference first)."""
        n_rows, n_cols = self.table_shape
        row_order = list(range(n_rows)) if row_order is None else list(row_order)
        col_order = list(range(n_cols)) if col_order is None else list(col_order)
        if self.kind == "relative":
            if row_order != sorted(row_order) or col_order != sorted(col_order):
                raise DomainError(
                    "reference-relative scores (xtilde/ytilde) are tied to the file's reference levels; "
                    "supply x_scores/y_scores or a saturated model to change the reference"
                )
            return DesignSpec(self.xtilde, self.ytilde)
        if self.kind == "scores":
            x = self.x_scores[row_order]
            y = self.y_scores[col_order]
            return DesignSpec(x[1:] - x[0], y[1:] - y[0])
        return DesignSpec.saturated(n_rows - 1, n_cols - 1)


def read_design(path) -> DesignFile:
    data = read_json(path)
    if data.get("model") == "saturated":
        shape = data.get("shape")
        if not (isinstance(shape, list) and len(shape) == 2 and all(isinstance(s, int) and s >= 2 for s in shape)):
            raise InputFileError("a saturated design needs shape [rows, cols] with both at least 2", path)
        return DesignFile("saturated", shape=(shape[0], shape[1]))
    if "xtilde" in data and "ytilde" in data:
        return DesignFile("relative", xtilde=_matrix(data["xtilde"], "xtilde", path),
                          ytilde=_matrix(data["ytilde"], "ytilde", path))
    if "x_scores" in data and "y_scores" in data:
        x = _matrix(data["x_scores"], "x_scores", path)
        y = _matrix(data["y_scores"], "y_scores", path)
        if x.shape[0] < 2 or y.shape[0] < 2:
            raise InputFileError("scores need at least two levels each", path)
        return DesignFile("scores", x_scores=x, y_scores=y)
    raise InputFileError("design needs xtilde/ytilde, x_scores/y_scores or model 'saturated'", path)


def read_hypothesis(path) -> tuple[np.ndarray, float | None]:
    data = read_json(path)
    if "Q" not in data:
        raise InputFileError("hypothesis needs a Q matrix", path)
    q = np.array(data["Q"], dtype=float)
    if q.ndim == 1:
        q = q[None, :]
    alpha = data.get("alpha")
    return q, None if alpha is None else float(alpha)


def read_theta(path) -> np.ndarray:
    data = read_json(path)
    if "theta" not in data:
        raise InputFileError("theta-prime file needs a theta matrix", path)
    return _matrix(data["theta"], "theta", path)


def read_marginals(path) -> dict:
    data = read_json(path)
    if "row" not in data or "col" not in data:
        raise InputFileError("marginals need 'row' and 'col'", path)
    out = {"row": np.array(data["row"], dtype=float), "col": np.array(data["col"], dtype=float)}
    if data.get("proportions") is not None:
        out["proportions"] = np.array(data["proportions"], dtype=float)
    return out


# -- output -------------------------------------------------------------------

def _round(x: float):
    if math.isnan(x) or math.isinf(x):
        return None
    if x == 0.0:
        return 0.0
    return float(f"{x:.{SIGNIFICANT_DIGITS}g}")


def normalise(obj):
    """Plain JSON types with every float rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): normalise(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalise(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return normalise(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    return obj


def dumps_json(payload: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION, **payload}
    return json.dumps(normalise(body), indent=2, ensure_ascii=False) + "\n"


def _flatten(prefix: str, obj, out: list):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def dumps_csv(payload: dict) -> str:
    """Flattened ``name,value`` rows with the same rounding as the JSON writer."""
    rows: list = []
    _flatten("", normalise({"schema_version": SCHEMA_VERSION, **payload}), rows)
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "value"])
    for name, value in rows:
        if value is None:
            value = ""
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        writer.writerow([name, value])
    return buf.getvalue()


def dumps_rows(header: list[str], rows) -> str:
    """A plain CSV table (used for power curves and dumped draws)."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in normalise(list(row))])
    return buf.getvalue()
