"""Time-series ingestion, lagged regression designs and AR residual scales.

The structural-form VAR is estimated one equation at a time.  Equation ``i``
(0-based) regresses ``y_{i,t}`` on

    (1, y_{t-1}', ..., y_{t-p}', -y_{0,t}, ..., -y_{i-1,t})

so it has ``k_i = n*p + i + 1`` columns.  The shared lag block is stored once
and the contemporaneous columns are appended on request.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or degenerate input data."""


@dataclass(frozen=True)
class Dataset:
    """A ``T x n`` block of observations with variable names.

    ``dates`` are opaque labels and are never interpreted.
    """

    values: np.ndarray
    names: tuple[str, ...]
    dates: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"values must be a non-empty T x n matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {r + 1}, column {c + 1}")
        names = tuple(str(s) for s in self.names)
        if len(names) != values.shape[1]:
            raise DataError(f"{len(names)} names for {values.shape[1]} columns")
        dupes = sorted({s for s in names if names.count(s) > 1})
        if dupes:
            raise DataError(f"duplicate variable names: {', '.join(dupes)}")
        dates = None
        if self.dates is not None:
            dates = tuple(str(d) for d in self.dates)
            if len(dates) != values.shape[0]:
                raise DataError(f"{len(dates)} date labels for {values.shape[0]} rows")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "dates", dates)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def select(self, columns: Sequence[int]) -> "Dataset":
        """Return a dataset with the columns reordered/subset as given."""
        columns = list(columns)
        return Dataset(self.values[:, columns], tuple(self.names[c] for c in columns), self.dates)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path) -> Dataset:
    """Read a comma-separated file with one header row.

    A leading label column is detected when any of its body cells is not
    numeric (or when its header is empty).  Lines starting with ``#`` are
    treated as metadata comments and skipped.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [
                (lineno, row)
                for lineno, row in enumerate(csv.reader(fh), start=1)
                if row and not row[0].startswith("#")
            ]
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no header row")
    _, header = rows[0]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: no data rows")
    width = len(header)
    for lineno, row in body:
        if len(row) != width:
            raise DataError(f"{path}: row {lineno} has {len(row)} cells, header has {width}")

    first = [row[0].strip() for _, row in body]
    has_labels = header[0].strip() == "" or any(not _is_number(c) for c in first)
    start = 1 if has_labels else 0
    names = [h.strip() for h in header[start:]]
    if not names:
        raise DataError(f"{path}: no numeric columns")

    values = np.empty((len(body), len(names)))
    for r, (lineno, row) in enumerate(body):
        for c, cell in enumerate(row[start:]):
            cell = cell.strip()
            col = c + start + 1
            if cell == "":
                raise DataError(f"{path}: empty cell at row {lineno}, column {col} ({names[c]})")
            try:
                x = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} at row {lineno}, column {col} ({names[c]})"
                ) from None
            if not math.isfinite(x):
                raise DataError(f"{path}: non-finite cell {cell!r} at row {lineno}, column {col}")
            values[r, c] = x

    dupes = sorted({s for s in names if names.count(s) > 1})
    if dupes:
        raise DataError(f"{path}: duplicate column names: {', '.join(dupes)}")
    return Dataset(values, tuple(names), tuple(first) if has_labels else None)


def write_csv(path, data: Dataset, comments: Sequence[str] = ()) -> None:
    """Write a dataset in the format read by :func:`load_csv`.

    Floats are written with ``repr`` so a write/read round trip is exact.
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        header = list(data.names)
        if data.dates is not None:
            header = ["date"] + header
        writer.writerow(header)
        for t in range(data.T):
            row = [repr(float(x)) for x in data.values[t]]
            if data.dates is not None:
                row = [data.dates[t]] + row
            writer.writerow(row)


@dataclass(frozen=True)
class RegressionBlocks:
    """Per-equation ``(y_i, X_i)`` pairs of the recursive structural VAR.

    Equations are indexed from 0.  ``lagged`` holds the common design
    ``(1, y_{t-1}', ..., y_{t-p}')`` and ``response`` the ``T_eff x n``
    left-hand-side matrix.
    """

    response: np.ndarray
    lagged: np.ndarray
    p: int
    names: tuple[str, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.response.shape[1]

    @property
    def T_eff(self) -> int:
        return self.response.shape[0]

    def k(self, i: int) -> int:
        return self.n * self.p + i + 1

    def y(self, i: int) -> np.ndarray:
        return self.response[:, i]

    def X(self, i: int) -> np.ndarray:
        return np.hstack([self.lagged, -self.response[:, :i]])

    def column_labels(self, i: int) -> list[str]:
        """``const``, ``L{l}.{name}`` lag columns, then ``-{name}`` contemporaneous columns."""
        names = self.names or tuple(f"y{j + 1}" for j in range(self.n))
        labels = ["const"]
        labels += [f"L{l}.{names[j]}" for l in range(1, self.p + 1) for j in range(self.n)]
        labels += [f"-{names[j]}" for j in range(i)]
        return labels

    def __iter__(self):
        for i in range(self.n):
            yield self.y(i), self.X(i)


def build_blocks(data, p: int) -> RegressionBlocks:
    """Build the per-equation regression designs for a VAR(p).

    ``data`` may be a :class:`Dataset` or a ``T x n`` array.  ``p = 0`` gives
    intercept-plus-contemporaneous designs, used for degenerate checks.
    """
    if isinstance(data, Dataset):
        Y, names = data.values, data.names
    else:
        Y = np.atleast_2d(np.asarray(data, dtype=float))
        if Y.shape[0] == 1 and np.ndim(data) == 1:
            Y = Y.T
        names = tuple(f"y{j + 1}" for j in range(Y.shape[1]))
    p = int(p)
    if p < 0:
        raise DataError(f"lag order must be non-negative, got {p}")
    T = Y.shape[0]
    if T <= p:
        raise DataError(f"need more than p={p} observations, got T={T}")
    T_eff = T - p
    cols = [np.ones((T_eff, 1))]
    for lag in range(1, p + 1):
        cols.append(Y[p - lag:T - lag])
    lagged = np.hstack(cols)
    response = Y[p:].copy()
    lagged.setflags(write=False)
    response.setflags(write=False)
    return RegressionBlocks(response=response, lagged=lagged, p=p, names=tuple(names))


@dataclass(frozen=True)
class ScaleVector:
    """AR residual variances ``s_i^2`` with a record of how they were fitted."""

    s2: np.ndarray
    lags: int = 4
    divisor: str = "mean"

    def __post_init__(self):
        s2 = np.asarray(self.s2, dtype=float).ravel()
        if not np.all(s2 > 0):
            raise DataError("all residual scales must be positive")
        s2.setflags(write=False)
        object.__setattr__(self, "s2", s2)

    def __len__(self):
        return len(self.s2)

    @property
    def metadata(self) -> dict:
        return {"model": f"AR({self.lags}) with intercept", "divisor": self.divisor,
                "divisor_rule": "T - lags" if self.divisor == "mean" else "T - 2*lags - 1"}


def ar4_scales(data, lags: int = 4, divisor: str = "mean") -> ScaleVector:
    """Residual variance of an intercept + AR(``lags``) least-squares fit per series.

    ``divisor="mean"`` divides the residual sum of squares by the number of
    fitted rows ``T - lags``; ``"dof"`` subtracts the ``lags + 1``
    estimated coefficients as well.
    """
    Y = data.values if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
    if Y.ndim == 2 and Y.shape[0] == 1:
        Y = Y.T
    if divisor not in ("mean", "dof"):
        raise ValueError(f"unknown divisor {divisor!r}")
    T, n = Y.shape
    n_coef = lags + 1
    if T - lags < n_coef + 1:
        raise DataError(f"AR({lags}) scales need at least {2 * lags + 2} observations, got T={T}")
    rows = T - lags
    out = np.empty(n)
    for j in range(n):
        x = Y[:, j]
        Z = np.column_stack([np.ones(rows)] + [x[lags - l:T - l] for l in range(1, lags + 1)])
        target = x[lags:]
        coef, _, rank, sv = np.linalg.lstsq(Z, target, rcond=None)
        resid = target - Z @ coef
        rss = float(resid @ resid)
        scale = max(float(np.abs(target).max()), 1.0)
        if rank < n_coef or sv[-1] <= 1e-10 * sv[0] or rss <= 1e-24 * scale**2 * rows:
            raise DataError(f"degenerate scale for variable {j + 1}: regressors are collinear")
        out[j] = rss / (rows if divisor == "mean" else rows - n_coef)
    return ScaleVector(out, lags=lags, divisor=divisor)
