"""Raw data to max-ranks and pseudo-observations.

Pseudo-observations are defined as rank/n (not the rank/(n+1) variant);
downstream rank formulas depend on this convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateColumn, TiesDetected

__all__ = [
    "DataMatrix",
    "PseudoObsMatrix",
    "compute_ranks",
    "jitter_ties",
    "load_csv",
]


@dataclass(frozen=True)
class DataMatrix:
    """An n x d matrix of real observations, rows = samples."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("data must be a 2-d array (rows = observations)")
        if values.shape[0] < 2 or values.shape[1] < 2:
            raise ValueError(f"need n >= 2 and d >= 2, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PseudoObsMatrix:
    """Column-wise max-ranks and the pseudo-observations rank/n.

    Each column of ``ranks`` is a permutation of 1..n, so every ``uhat``
    column takes each value in {1/n, ..., 1} exactly once.
    """

    uhat: np.ndarray
    ranks: np.ndarray

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64)
        uhat = np.asarray(self.uhat, dtype=float)
        n = ranks.shape[0]
        expected = np.arange(1, n + 1)
        for j in range(ranks.shape[1]):
            if not np.array_equal(np.sort(ranks[:, j]), expected):
                raise ValueError(f"ranks column {j} is not a permutation of 1..n")
        if not np.array_equal(uhat, ranks / n):
            raise ValueError("uhat must equal ranks/n")
        object.__setattr__(self, "ranks", ranks)
        object.__setattr__(self, "uhat", uhat)

    @property
    def n(self) -> int:
        return self.ranks.shape[0]

    @property
    def d(self) -> int:
        return self.ranks.shape[1]


def _column_ranks(col: np.ndarray) -> np.ndarray:
    # tie-free, so ordinal ranks coincide with max-ranks
    order = np.argsort(col, kind="stable")
    ranks = np.empty(len(col), dtype=np.int64)
    ranks[order] = np.arange(1, len(col) + 1)
    return ranks


def find_tied_column(values: np.ndarray) -> int | None:
    """Index of the first column containing ties, or None."""
    for j in range(values.shape[1]):
        if np.unique(values[:, j]).size < values.shape[0]:
            return j
    return None


def compute_ranks(data: DataMatrix) -> PseudoObsMatrix:
    """Column-wise max-ranks and pseudo-observations rank/n.

    Raises TiesDetected if any column contains duplicate values.
    """
    values = data.values
    j = find_tied_column(values)
    if j is not None:
        raise TiesDetected(j)
    ranks = np.column_stack([_column_ranks(values[:, j]) for j in range(data.d)])
    return PseudoObsMatrix(uhat=ranks / data.n, ranks=ranks)


def jitter_ties(data: DataMatrix, seed: int) -> DataMatrix:
    """Break ties by deterministic perturbations of magnitude < 1e-9 * column range.

    Only tied entries are touched; tie-free input is returned bitwise
    unchanged.  Raises DegenerateColumn for a constant column.
    """
    values = data.values.copy()
    touched = False
    for j in range(data.d):
        col = values[:, j]
        uniq, counts = np.unique(col, return_counts=True)
        if uniq.size == data.n:
            continue
        col_range = col.max() - col.min()
        if col_range == 0.0:
            raise DegenerateColumn(j)
        tied_values = uniq[counts > 1]
        tied_mask = np.isin(col, tied_values)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, j)))
        for attempt in range(100):
            noise = (rng.random(int(tied_mask.sum())) - 0.5) * 1e-9 * col_range
            candidate = col.copy()
            candidate[tied_mask] = candidate[tied_mask] + noise
            if np.unique(candidate).size == data.n:
                values[:, j] = candidate
                break
        else:  # pragma: no cover - probability zero with continuous draws
            raise DegenerateColumn(j)
        touched = True
    if not touched:
        return data
    return DataMatrix(values)


def load_csv(path: str | Path, header: bool = False, delimiter: str = ",") -> DataMatrix:
    """Read a delimited file of observations (rows = samples, decimal point '.')."""
    try:
        values = np.loadtxt(path, delimiter=delimiter, skiprows=1 if header else 0, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"malformed CSV file {path}: {exc}") from exc
    return DataMatrix(values)
