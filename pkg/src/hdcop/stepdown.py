"""Multiplier-bootstrap stepdown testing of one-sided Spearman hypotheses.

Tests H_I: rho_I <= 0 against rho_I > 0 for every pair simultaneously, with
critical values recomputed over the shrinking set of surviving hypotheses.
One shared block of multiplier draws is reused across steps, which makes the
critical values monotone by construction and runs bit-reproducible.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .association import spearman_all
from .errors import InsufficientReplicates
from .ranks import DataMatrix, PseudoObsMatrix, compute_ranks

__all__ = [
    "ScoreMatrix",
    "StepdownResult",
    "compute_xhat",
    "compute_xhat_bruteforce",
    "multiplier_draw",
    "multiplier_matrix",
    "stepdown_test",
    "fwer_experiment",
]


@dataclass(frozen=True)
class ScoreMatrix:
    """Observable per-sample scores x-hat, one column per pair."""

    xhat: np.ndarray  # (n, P)
    pairs: list[tuple[int, int]]
    n: int
    d: int


def compute_xhat(pseudo: PseudoObsMatrix) -> ScoreMatrix:
    """Observable Spearman scores, O(n log n) per pair via rank prefix sums.

    Uses the fully expanded display: the indicator sums over j with
    rank_j <= rank_i are prefix sums in rank order, because each rank column
    is a permutation.
    """
    n, d = pseudo.n, pseudo.d
    uhat = pseudo.uhat
    ranks = pseudo.ranks
    pairs = list(combinations(range(d), 2))
    idx = np.array(pairs)
    pl, pm = idx[:, 0], idx[:, 1]

    one_minus = 1.0 - uhat
    term1 = 12.0 * one_minus[:, pl] * one_minus[:, pm]  # (n, P)
    cross = (36.0 / n) * np.sum(uhat[:, pl] * uhat[:, pm], axis=0)  # (P,)

    # prefix sums of (1 - uhat[:, other]) in rank order of the lead column
    def prefix_term(lead, other):
        ordered = np.empty((n, len(pairs)))
        np.put_along_axis(ordered, ranks[:, lead] - 1, one_minus[:, other], axis=0)
        csum = np.cumsum(ordered, axis=0)
        return np.take_along_axis(csum, ranks[:, lead] - 1, axis=0)

    term3 = (12.0 / n) * prefix_term(pl, pm)
    term4 = (12.0 / n) * prefix_term(pm, pl)
    return ScoreMatrix(xhat=term1 - cross + term3 + term4, pairs=pairs, n=n, d=d)


def compute_xhat_bruteforce(pseudo: PseudoObsMatrix) -> ScoreMatrix:
    """O(n^2) per pair, straight from the defining display (oracle path)."""
    n, d = pseudo.n, pseudo.d
    uhat = pseudo.uhat
    pairs = list(combinations(range(d), 2))
    xhat = np.empty((n, len(pairs)))
    for p, (ell, m) in enumerate(pairs):
        ul, um = uhat[:, ell], uhat[:, m]
        for i in range(n):
            inner = (
                3.0 * ul * um
                - (ul <= ul[i]) * (1.0 - um)
                - (um <= um[i]) * (1.0 - ul)
            )
            xhat[i, p] = 12.0 * (1.0 - ul[i]) * (1.0 - um[i]) - 12.0 / n * float(np.sum(inner))
    return ScoreMatrix(xhat=xhat, pairs=pairs, n=n, d=d)


def _multiplier_rng(seed: int, replicate: int) -> np.random.Generator:
    # counter-based stream: Philox keyed by (seed, replicate)
    return np.random.Generator(np.random.Philox(key=np.array([seed, replicate], dtype=np.uint64)))


def multiplier_draw(scores: ScoreMatrix, seed: int, replicate: int) -> np.ndarray:
    """One multiplier-bootstrap replicate: n^{-1/2} sum_i e_i xhat_{i, I}.

    The same standard normal vector is shared across pairs, preserving the
    joint distribution over the pair index.
    """
    e = _multiplier_rng(seed, replicate).standard_normal(scores.n)
    return (e @ scores.xhat) / math.sqrt(scores.n)


def multiplier_matrix(scores: ScoreMatrix, B: int, seed: int) -> np.ndarray:
    """All B bootstrap replicates, rows indexed by replicate."""
    out = np.empty((B, scores.xhat.shape[1]))
    for b in range(B):
        out[b] = multiplier_draw(scores, seed, b)
    return out


@dataclass(frozen=True)
class StepdownStep:
    active: list[tuple[int, int]]
    critical_value: float
    newly_rejected: list[tuple[int, int]]


@dataclass(frozen=True)
class StepdownResult:
    n: int
    d: int
    alpha: float
    B: int
    seed: int
    two_sided: bool
    pairs: list[tuple[int, int]]
    statistics: np.ndarray  # T_{n, I} = sqrt(n) rho_hat per pair
    rejected: list[tuple[int, int]]
    steps: list[StepdownStep]

    def to_json(self) -> str:
        payload = {
            "schema": "hdcop/stepdown/v1",
            "n": self.n,
            "d": self.d,
            "alpha": self.alpha,
            "B": self.B,
            "seed": self.seed,
            "two_sided": self.two_sided,
            "pairs": [list(p) for p in self.pairs],
            "statistics": [float(t) for t in self.statistics],
            "rejected": [list(p) for p in self.rejected],
            "steps": [
                {
                    "active": [list(p) for p in s.active],
                    "critical_value": s.critical_value,
                    "newly_rejected": [list(p) for p in s.newly_rejected],
                }
                for s in self.steps
            ],
        }
        return json.dumps(payload, sort_keys=True)


def _order_statistic_quantile(values: np.ndarray, alpha: float) -> float:
    """Conservative empirical quantile: the ceil(B(1-alpha)) order statistic."""
    B = values.shape[0]
    k = min(B, max(1, math.ceil(B * (1.0 - alpha))))
    return float(np.partition(values, k - 1)[k - 1])


def stepdown_test(
    data: DataMatrix | PseudoObsMatrix,
    alpha: float = 0.05,
    B: int = 1000,
    seed: int = 0,
    two_sided: bool = False,
) -> StepdownResult:
    """Romano-Wolf stepdown over all pairs with multiplier critical values.

    Rejections strictly grow across steps; the loop stops when a step rejects
    nothing (or everything is rejected).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if B < 100:
        raise ValueError("need B >= 100 bootstrap replicates")
    if B * alpha < 5:
        warnings.warn(
            f"B*alpha = {B * alpha:.1f} < 5: bootstrap quantile is very coarse",
            InsufficientReplicates,
        )
    pseudo = data if isinstance(data, PseudoObsMatrix) else compute_ranks(data)
    scores = compute_xhat(pseudo)
    stats = math.sqrt(pseudo.n) * spearman_all(pseudo)
    boot = multiplier_matrix(scores, B, seed)
    if two_sided:
        stats_cmp = np.abs(stats)
        boot_cmp = np.abs(boot)
    else:
        stats_cmp = stats
        boot_cmp = boot

    pairs = scores.pairs
    active = np.ones(len(pairs), dtype=bool)
    steps: list[StepdownStep] = []
    rejected = np.zeros(len(pairs), dtype=bool)
    while True:
        c = _order_statistic_quantile(boot_cmp[:, active].max(axis=1), alpha)
        newly = active & (stats_cmp > c)
        steps.append(
            StepdownStep(
                active=[pairs[i] for i in np.flatnonzero(active)],
                critical_value=c,
                newly_rejected=[pairs[i] for i in np.flatnonzero(newly)],
            )
        )
        if not newly.any():
            break
        rejected |= newly
        active &= ~newly
        if not active.any():
            break
    return StepdownResult(
        n=pseudo.n,
        d=pseudo.d,
        alpha=alpha,
        B=B,
        seed=seed,
        two_sided=two_sided,
        pairs=pairs,
        statistics=stats,
        rejected=[pairs[i] for i in np.flatnonzero(rejected)],
        steps=steps,
    )


def fwer_experiment(
    model,
    n: int,
    alpha: float,
    B: int,
    reps: int,
    seed: int,
    null_pairs: list[tuple[int, int]] | None = None,
    two_sided: bool = False,
) -> dict:
    """Family-wise error estimate over replicated stepdown runs.

    ``null_pairs`` defaults to every pair whose population Spearman rho is
    <= 0 under the model (all pairs for null-compatible samplers).
    """
    from .empirical import ranks_raw

    if null_pairs is None:
        null_pairs = _true_null_pairs(model)
    null_set = {tuple(p) for p in null_pairs}
    false_any = 0
    reject_counts: dict[tuple[int, int], int] = {}
    for rep in range(reps):
        sample = model.sample(n, np.random.SeedSequence(entropy=(seed, rep)))
        ranks = ranks_raw(sample)
        pseudo = PseudoObsMatrix(uhat=ranks / n, ranks=ranks)
        result = stepdown_test(pseudo, alpha=alpha, B=B, seed=seed + 7_000_003 + rep, two_sided=two_sided)
        rejected = {tuple(p) for p in result.rejected}
        if rejected & null_set:
            false_any += 1
        for p in rejected:
            reject_counts[p] = reject_counts.get(p, 0) + 1
    pair_rates = {p: c / reps for p, c in sorted(reject_counts.items())}
    alt_pairs = [p for p in pair_rates if p not in null_set]
    return {
        "fwer": false_any / reps,
        "reps": reps,
        "null_pairs": sorted(null_set),
        "pair_rejection_rates": {str(list(p)): r for p, r in pair_rates.items()},
        "min_alternative_power": min((pair_rates[p] for p in alt_pairs), default=None),
    }


def _true_null_pairs(model) -> list[tuple[int, int]]:
    from .models import GaussianCopula

    pairs = list(combinations(range(model.dim), 2))
    if isinstance(model, GaussianCopula):
        # rho_I = (6/pi) arcsin(rho/2) <= 0 iff rho <= 0
        return [(i, j) for i, j in pairs if model.corr[i, j] <= 0.0]
    return pairs
