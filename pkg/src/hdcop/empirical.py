"""Empirical copula, empirical processes, and the linearization residual.

The residual measurement compares the rank-based pair process against its
rank-free linearization (standard empirical process minus derivative-weighted
marginal processes) on a lattice, uniformly over all coordinate pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import TiesDetected
from .models import CopulaModel, GaussianCopula, ClaytonCopula, IndependenceCopula, _gauss2_cdf, _gauss2_d1
from .ranks import PseudoObsMatrix

__all__ = [
    "EmpiricalCopula",
    "StuteResidualReport",
    "alpha_process",
    "cbar_process",
    "stute_residual",
    "rank_cum_table",
    "ranks_raw",
]


def ranks_raw(values: np.ndarray) -> np.ndarray:
    """Column-wise ranks of a raw array, without the n >= 2 constraint."""
    values = np.asarray(values, dtype=float)
    n, d = values.shape
    ranks = np.empty((n, d), dtype=np.int64)
    for j in range(d):
        if np.unique(values[:, j]).size < n:
            raise TiesDetected(j)
        order = np.argsort(values[:, j], kind="stable")
        ranks[order, j] = np.arange(1, n + 1)
    return ranks


def rank_cum_table(r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Integer table C[a, b] = #{i : r1_i <= a, r2_i <= b}, shape (n+1, n+1)."""
    n = r1.shape[0]
    table = np.zeros((n + 1, n + 1), dtype=np.int64)
    table[r1, r2] = 1
    np.cumsum(table, axis=0, out=table)
    np.cumsum(table, axis=1, out=table)
    return table


@dataclass(frozen=True)
class EmpiricalCopula:
    """The empirical copula of a pseudo-observation sample."""

    pseudo: PseudoObsMatrix

    def eval(self, u) -> float:
        """Value in {0, 1/n, ..., 1}; only coordinates below one are tested."""
        u = np.asarray(u, dtype=float)
        active = np.flatnonzero(u < 1.0)
        if active.size == 0:
            return 1.0
        hits = np.all(self.pseudo.uhat[:, active] <= u[active], axis=1)
        return float(np.count_nonzero(hits)) / self.pseudo.n

    def margin_eval(self, j: int, u_j: float) -> float:
        return float(np.count_nonzero(self.pseudo.uhat[:, j] <= u_j)) / self.pseudo.n


def alpha_process(true_u: np.ndarray, model: CopulaModel, u) -> float:
    """Standard empirical process sqrt(n) (G_n(u) - C(u)) from true uniforms."""
    true_u = np.asarray(true_u, dtype=float)
    u = np.asarray(u, dtype=float)
    n = true_u.shape[0]
    gn = np.mean(np.all(true_u <= u, axis=1))
    return float(np.sqrt(n) * (gn - model.cdf(u)))


def cbar_process(true_u: np.ndarray, model: CopulaModel, pair, w) -> float:
    """Linearized pair process: alpha minus derivative-weighted marginal terms.

    Marginal terms vanish at coordinates equal to 0 or 1, so derivatives are
    only evaluated at interior coordinates.
    """
    true_u = np.asarray(true_u, dtype=float)
    w = np.asarray(w, dtype=float)
    ell, m = pair
    n = true_u.shape[0]
    margin = model.pair_margin(pair)
    pair_u = true_u[:, [ell, m]]
    gn = np.mean(np.all(pair_u <= w, axis=1))
    value = np.sqrt(n) * (gn - margin.cdf(w))
    for which, col in ((0, ell), (1, m)):
        wj = w[which]
        if 0.0 < wj < 1.0:
            alpha_j = np.sqrt(n) * (np.mean(true_u[:, col] <= wj) - wj)
            value -= margin.partial1(which, w) * alpha_j
    return float(value)


@dataclass(frozen=True)
class StuteResidualReport:
    """Grid sup of |pair process - linearized pair process| over all pairs."""

    n: int
    d: int
    grid_resolution: int
    pairs: list[tuple[int, int]]
    per_pair_sups: list[float]
    model: dict
    seed: int | None = None

    @property
    def residual_sup(self) -> float:
        return max(self.per_pair_sups)

    def to_json(self) -> str:
        payload = {
            "schema": "hdcop/stute_residual/v1",
            "n": self.n,
            "d": self.d,
            "grid_resolution": self.grid_resolution,
            "pairs": [list(p) for p in self.pairs],
            "per_pair_sups": self.per_pair_sups,
            "residual_sup": self.residual_sup,
            "model": self.model,
            "seed": self.seed,
        }
        return json.dumps(payload, sort_keys=True)


def _pair_cdf_grid(margin: CopulaModel, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(C, dC/du, dC/dv) on the tensor grid for a bivariate margin."""
    uu, vv = np.meshgrid(grid, grid, indexing="ij")
    if isinstance(margin, IndependenceCopula):
        return uu * vv, vv.copy(), uu.copy()
    if isinstance(margin, GaussianCopula):
        rho = float(margin.corr[0, 1])
        return _gauss2_cdf(uu, vv, rho), _gauss2_d1(uu, vv, rho), _gauss2_d1(vv, uu, rho)
    if isinstance(margin, ClaytonCopula):
        th = margin.theta
        c = (uu ** (-th) + vv ** (-th) - 1.0) ** (-1.0 / th)
        return c, (c / uu) ** (th + 1.0), (c / vv) ** (th + 1.0)
    cgrid = np.empty_like(uu)
    d1 = np.empty_like(uu)
    d2 = np.empty_like(uu)
    for a in range(grid.size):
        for b in range(grid.size):
            pt = np.array([grid[a], grid[b]])
            cgrid[a, b] = margin.cdf(pt)
            d1[a, b] = margin.partial1(0, pt)
            d2[a, b] = margin.partial1(1, pt)
    return cgrid, d1, d2


def _grid_cum_counts(idx1: np.ndarray, idx2: np.ndarray, m: int) -> np.ndarray:
    """Cumulative 2-d counts on grid lines 0..m from per-point bin indices."""
    table = np.zeros((m + 1, m + 1), dtype=np.int64)
    np.add.at(table, (np.clip(idx1, 0, m), np.clip(idx2, 0, m)), 1)
    np.cumsum(table, axis=0, out=table)
    np.cumsum(table, axis=1, out=table)
    return table


def stute_residual(
    true_u: np.ndarray,
    model: CopulaModel,
    grid_resolution: int = 64,
    seed: int | None = None,
) -> StuteResidualReport:
    """Sup over pairs and the lattice of the linearization residual.

    The rank-based process uses ranks of the sample; the linearized process
    uses the true uniforms.  The sup includes the boundary-one lines, where
    the linearized process vanishes identically.
    """
    true_u = np.asarray(true_u, dtype=float)
    n, d = true_u.shape
    m = grid_resolution
    ranks = ranks_raw(true_u)
    sqrt_n = np.sqrt(n)
    grid = np.arange(1, m) / m

    # grid-line bin index of each observation: smallest a with value <= a/m
    rank_bins = (m * ranks + n - 1) // n  # ceil(m * R / n), exact integers
    true_bins = np.ceil(m * true_u).astype(np.int64)

    grid_cache: dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    pairs = list(combinations(range(d), 2))
    sups = []
    for ell, mm in pairs:
        margin = model.pair_margin((ell, mm))
        key = margin.key()
        if key not in grid_cache:
            grid_cache[key] = _pair_cdf_grid(margin, grid)
        cgrid, d1, d2 = grid_cache[key]

        chat = _grid_cum_counts(rank_bins[:, ell], rank_bins[:, mm], m)[1:m, 1:m] / n
        gn = _grid_cum_counts(true_bins[:, ell], true_bins[:, mm], m)[1:m, 1:m] / n
        alpha1 = sqrt_n * (np.cumsum(np.bincount(true_bins[:, ell], minlength=m + 1))[1:m] / n - grid)
        alpha2 = sqrt_n * (np.cumsum(np.bincount(true_bins[:, mm], minlength=m + 1))[1:m] / n - grid)

        cn = sqrt_n * (chat - cgrid)
        cbar = sqrt_n * (gn - cgrid) - d1 * alpha1[:, None] - d2 * alpha2[None, :]
        sup = float(np.max(np.abs(cn - cbar)))

        # boundary-one lines: the linearized process is exactly zero there, and
        # the rank-based margin at a/m equals floor(n a / m)/n
        a = np.arange(1, m)
        line = sqrt_n * np.abs((n * a) // m / n - grid)
        sup = max(sup, float(np.max(line)))
        sups.append(sup)

    return StuteResidualReport(
        n=n,
        d=d,
        grid_resolution=m,
        pairs=pairs,
        per_pair_sups=sups,
        model=model.descriptor(),
        seed=seed,
    )
