"""Core data containers and structural operators.

The response matrix holds the organ-by-patient scores with an observation
mask; the covariate table holds one feature row per (organ, patient) pair.
The vector<->matrix reshape uses the row-major (organ-major) convention
everywhere: pair (i, j) maps to flat index i * n + j.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, DimensionError


@dataclass(frozen=True)
class MaskedResponseMatrix:
    """Dense m x n score matrix plus a boolean observation mask.

    Unobserved entries are stored as 0.0 but carry no meaning; only the
    mask decides observedness.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2:
            raise DimensionError(f"values must be 2-D, got shape {values.shape}")
        if mask.shape != values.shape:
            raise DimensionError(
                f"mask shape {mask.shape} != values shape {values.shape}"
            )
        if not mask.any():
            raise DegenerateInputError("matrix has no observed entries")
        if not np.isfinite(values[mask]).all():
            raise DimensionError("observed entries must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        self.values.setflags(write=False)
        self.mask.setflags(write=False)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    @property
    def sparsity(self) -> float:
        return 1.0 - self.n_observed / (self.m * self.n)

    def observed_values(self) -> np.ndarray:
        return self.values[self.mask]


@dataclass(frozen=True)
class CovariateTable:
    """(m*n) x p feature matrix, one row per (organ, patient) pair.

    Row ordering follows the row-major pair convention: the row for
    organ i and patient j sits at index i * n + j.
    """

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise DimensionError(f"rows must be 2-D, got shape {rows.shape}")
        if not np.isfinite(rows).all():
            raise DimensionError("covariates must be finite")
        object.__setattr__(self, "rows", rows)
        self.rows.setflags(write=False)

    @property
    def p(self) -> int:
        return self.rows.shape[1]


def reshape_to_matrix(v: np.ndarray, m: int, n: int) -> np.ndarray:
    """Map a length-(m*n) vector to an m x n matrix, row-major."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != m * n:
        raise DimensionError(f"expected vector of length {m * n}, got shape {v.shape}")
    return v.reshape(m, n)


def flatten(A: np.ndarray) -> np.ndarray:
    """Inverse of :func:`reshape_to_matrix`."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {A.shape}")
    return A.reshape(-1)


def project_observed(A: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Keep observed entries, zero the rest."""
    A = np.asarray(A, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if A.shape != mask.shape:
        raise DimensionError(f"shape mismatch: {A.shape} vs {mask.shape}")
    return np.where(mask, A, 0.0)


def standardize(Y: MaskedResponseMatrix) -> tuple[MaskedResponseMatrix, tuple[float, float]]:
    """Shift/scale observed entries to mean 0, sd 1.

    Returns the standardized matrix and (shift, scale) such that
    original = shift + scale * standardized. Ranking order is preserved
    since the map is affine with positive scale.
    """
    obs = Y.observed_values()
    if obs.size < 2:
        raise DegenerateInputError("need at least 2 observed entries to standardize")
    shift = float(obs.mean())
    scale = float(obs.std())
    if scale == 0.0:
        raise DegenerateInputError("observed entries have zero variance")
    values = np.where(Y.mask, (Y.values - shift) / scale, 0.0)
    return MaskedResponseMatrix(values, Y.mask.copy()), (shift, scale)


def write_matrix_csv(Y: MaskedResponseMatrix, path: str | Path) -> None:
    """Write observed entries as `row,col,value` triplets with a size header."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# m={Y.m} n={Y.n}\n")
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "value"])
        rows, cols = np.nonzero(Y.mask)
        for i, j in zip(rows, cols):
            writer.writerow([int(i), int(j), repr(float(Y.values[i, j]))])


def read_matrix_csv(path: str | Path) -> MaskedResponseMatrix:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise DimensionError(f"missing size header in {path}")
        parts = dict(tok.split("=") for tok in header.lstrip("#").split())
        m, n = int(parts["m"]), int(parts["n"])
        reader = csv.reader(fh)
        next(reader)  # column header
        values = np.zeros((m, n))
        mask = np.zeros((m, n), dtype=bool)
        for row in reader:
            if not row:
                continue
            i, j, val = int(row[0]), int(row[1]), float(row[2])
            values[i, j] = val
            mask[i, j] = True
    return MaskedResponseMatrix(values, mask)


def write_covariates_csv(X: CovariateTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_index"] + [f"f{k}" for k in range(X.p)])
        for idx, row in enumerate(X.rows):
            writer.writerow([idx] + [repr(float(x)) for x in row])


def read_covariates_csv(path: str | Path) -> CovariateTable:
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim == 1:
        data = data[None, :]
    return CovariateTable(data[:, 1:])
