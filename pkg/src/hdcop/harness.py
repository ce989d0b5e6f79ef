"""Monte Carlo experiment driver: seeded, resumable, streamed to JSON lines.

Each experiment is a grid of cells (one per sample size) times independent
replicates.  Replicate records append to a JSONL log as they finish, so a
killed run resumes from the log; summaries are computed from records sorted
by (cell, replicate), which makes the final numbers independent of both
scheduling and interruption.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from threading import Lock

import numpy as np

from . import __version__
from .association import blomquist_all, g_scores, kendall_all, population_rho, population_tau, spearman_all
from .empirical import ranks_raw, stute_residual
from .errors import ConfigInvalid
from .maxtest import run_maxtest
from .models import CopulaModel, model_from_spec
from .moebius import moebius_test, v_stat_all
from .ranks import PseudoObsMatrix
from .stepdown import _true_null_pairs, stepdown_test

__all__ = [
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "ExperimentResult",
    "run_experiment",
    "summarize_records",
    "load_records",
    "variance_floor_check",
]

EXPERIMENT_KINDS = (
    "stute_decay",
    "max_null_calibration",
    "fwer",
    "moebius_calibration",
    "v_decay",
    "linearization",
)

_RATE_KINDS = {"max_null_calibration", "moebius_calibration", "fwer"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: dict
    n_grid: tuple[int, ...]
    reps: int
    seed: int
    alpha: float = 0.05
    B: int = 500
    gamma: str = "rho"
    grid_resolution: int = 64
    calibration: str = "gumbel"
    two_sided: bool = False

    @staticmethod
    def from_dict(payload: dict) -> "ExperimentConfig":
        known = {f for f in ExperimentConfig.__dataclass_fields__} | {"n"}
        unknown = set(payload) - known
        if unknown:
            raise ConfigInvalid([f"unknown field {k!r}" for k in sorted(unknown)])
        if "n" in payload and "n_grid" in payload:
            raise ConfigInvalid(["give either 'n' or 'n_grid', not both"])
        n_grid = payload.get("n_grid", payload.get("n", 250))
        if isinstance(n_grid, (int, float)):
            n_grid = (int(n_grid),)
        cfg = ExperimentConfig(
            kind=payload.get("kind", ""),
            model=payload.get("model", {}),
            n_grid=tuple(int(n) for n in n_grid),
            reps=int(payload.get("reps", 0)),
            seed=int(payload.get("seed", 0)),
            alpha=float(payload.get("alpha", 0.05)),
            B=int(payload.get("B", 500)),
            gamma=str(payload.get("gamma", "rho")),
            grid_resolution=int(payload.get("grid_resolution", 64)),
            calibration=str(payload.get("calibration", "gumbel")),
            two_sided=bool(payload.get("two_sided", False)),
        )
        cfg.validate()
        return cfg

    @staticmethod
    def from_json(path_or_text: str | Path) -> "ExperimentConfig":
        p = Path(path_or_text)
        text = p.read_text() if p.exists() else str(path_or_text)
        return ExperimentConfig.from_dict(json.loads(text))

    def validate(self) -> CopulaModel:
        problems = []
        if self.kind not in EXPERIMENT_KINDS:
            problems.append(f"kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.reps < 1:
            problems.append("reps must be >= 1")
        if self.seed < 0:
            problems.append("seed must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            problems.append("alpha must lie in (0, 1)")
        if any(n < 2 for n in self.n_grid):
            problems.append("all sample sizes must be >= 2")
        if self.gamma not in ("rho", "tau", "beta"):
            problems.append(f"gamma must be rho/tau/beta, got {self.gamma!r}")
        model = None
        try:
            model = model_from_spec(self.model)
        except Exception as exc:
            problems.append(f"model: {exc}")
        if model is not None:
            if self.kind == "moebius_calibration" and model.dim < 3:
                problems.append("moebius calibration needs d >= 3")
            if self.kind == "max_null_calibration" and model.dim < 3 and self.calibration == "gumbel":
                problems.append("gumbel calibration needs d >= 3")
        if problems:
            raise ConfigInvalid(problems)
        return model

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "model": self.model,
            "n_grid": list(self.n_grid),
            "reps": self.reps,
            "seed": self.seed,
            "alpha": self.alpha,
            "B": self.B,
            "gamma": self.gamma,
            "grid_resolution": self.grid_resolution,
            "calibration": self.calibration,
            "two_sided": self.two_sided,
        }


@dataclass(frozen=True)
class ExperimentResult:
    config: dict
    kind: str
    cells: list[dict]
    wall_clock_s: float
    version: str = __version__

    def canonical_json(self) -> str:
        """Deterministic payload (timing excluded): identical across reruns."""
        payload = {
            "schema": "hdcop/experiment/v1",
            "config": self.config,
            "kind": self.kind,
            "cells": self.cells,
            "version": self.version,
        }
        return json.dumps(payload, sort_keys=True)

    def to_json(self) -> str:
        payload = json.loads(self.canonical_json())
        payload["wall_clock_s"] = self.wall_clock_s
        return json.dumps(payload, sort_keys=True)


# ---------------------------------------------------------------------------
# Replicate bodies
# ---------------------------------------------------------------------------


def _pseudo(sample: np.ndarray) -> PseudoObsMatrix:
    ranks = ranks_raw(sample)
    return PseudoObsMatrix(uhat=ranks / sample.shape[0], ranks=ranks)


def _derived_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(entropy=entropy).generate_state(1, dtype=np.uint64)[0])


def _replicate(config: ExperimentConfig, model: CopulaModel, cell: int, n: int, rep: int) -> dict:
    sample = model.sample(n, np.random.SeedSequence(entropy=(config.seed, cell, rep)))
    kind = config.kind
    if kind == "stute_decay":
        report = stute_residual(sample, model, config.grid_resolution)
        return {"residual_sup": report.residual_sup}
    if kind == "max_null_calibration":
        report = run_maxtest(_pseudo(sample), gamma=config.gamma, alpha=config.alpha, calibration=config.calibration)
        return {"p_value": report.p_value, "reject": int(report.reject)}
    if kind == "fwer":
        result = stepdown_test(
            _pseudo(sample),
            alpha=config.alpha,
            B=config.B,
            seed=_derived_seed(config.seed, 1_000_003 + cell, rep),
            two_sided=config.two_sided,
        )
        null_set = {tuple(p) for p in _true_null_pairs(model)}
        rejected = [list(p) for p in result.rejected]
        false_rejection = any(tuple(p) in null_set for p in result.rejected)
        return {"reject": int(false_rejection), "rejected": rejected}
    if kind == "moebius_calibration":
        report = moebius_test(_pseudo(sample), alpha=config.alpha)
        return {"p_value": report.p_value, "reject": int(report.reject)}
    if kind == "v_decay":
        return {"max_abs_v": float(np.max(np.abs(v_stat_all(sample))))}
    if kind == "linearization":
        return _linearization_replicate(model, sample)
    raise ConfigInvalid([f"unknown kind {kind!r}"])


def _linearization_replicate(model: CopulaModel, sample: np.ndarray) -> dict:
    n, d = sample.shape
    ps = _pseudo(sample)
    pairs = list(combinations(range(d), 2))
    estimates = {"rho": spearman_all(ps), "tau": kendall_all(ps), "beta": blomquist_all(ps)}
    out = {}
    for gamma in ("rho", "tau", "beta"):
        errs = []
        for p, pair in enumerate(pairs):
            margin = model.pair_margin(pair)
            pop = _population_gamma(gamma, margin)
            score_sum = float(np.sum(g_scores(gamma, model, pair, sample[:, pair]))) / math.sqrt(n)
            errs.append(abs(math.sqrt(n) * (estimates[gamma][p] - pop) - score_sum))
        out[f"err_{gamma}"] = max(errs)
    return out


def _population_gamma(gamma: str, margin: CopulaModel) -> float:
    if gamma == "rho":
        return population_rho(margin)
    if gamma == "tau":
        return population_tau(margin)
    half = np.array([0.5, 0.5])
    return 4.0 * margin.cdf(half) - 1.0


def variance_floor_check(model: CopulaModel, n_mc: int = 20000, seed: int = 0) -> float:
    """Monte Carlo check of the variance floor Var(x^2) over all pairs.

    Only meaningful for simulation models (the quantity is not observable);
    returns the minimum across pairs.
    """
    sample = model.sample(n_mc, seed)
    floor = math.inf
    for pair in combinations(range(model.dim), 2):
        x = g_scores("rho", model, pair, sample[:, pair])
        floor = min(floor, float(np.var(x**2)))
    return floor


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def load_records(path: str | Path) -> tuple[dict | None, dict[tuple[int, int], dict]]:
    """Read a JSONL replicate log: (config header or None, {(cell, rep): row}).

    The first line of a log written by run_experiment is a config header, so
    a results file is self-describing for summarize/report.
    """
    records: dict[tuple[int, int], dict] = {}
    header = None
    p = Path(path)
    if not p.exists():
        return header, records
    with p.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if "config" in row:
                header = row["config"]
                continue
            records[(int(row["cell"]), int(row["rep"]))] = row
    return header, records


def run_experiment(
    config: ExperimentConfig | dict,
    out_path: str | Path | None = None,
    resume: bool = True,
    threads: int = 1,
) -> ExperimentResult:
    """Run (or resume) all replicates and summarize per cell.

    Per-replicate RNG streams are keyed (seed, cell, replicate), so results
    are independent of scheduling and of which replicates were already on
    disk.
    """
    if isinstance(config, dict):
        config = ExperimentConfig.from_dict(config)
    model = config.validate()
    started = time.perf_counter()

    existing: dict[tuple[int, int], dict] = {}
    header = None
    if out_path and resume:
        header, existing = load_records(out_path)
        if header is not None and header != config.to_dict():
            raise ConfigInvalid([f"log {out_path} was written for a different config"])
    sink = None
    lock = Lock()
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        sink = open(out_path, "a" if (resume and header is not None) else "w")
        if header is None:
            sink.write(json.dumps({"config": config.to_dict()}, sort_keys=True) + "\n")
            sink.flush()

    records: dict[tuple[int, int], dict] = dict(existing)

    def work(cell: int, n: int, rep: int):
        metrics = _replicate(config, model, cell, n, rep)
        row = {"cell": cell, "n": n, "rep": rep, **metrics}
        with lock:
            records[(cell, rep)] = row
            if sink is not None:
                sink.write(json.dumps(row, sort_keys=True) + "\n")
                sink.flush()

    try:
        pending = [
            (cell, n, rep)
            for cell, n in enumerate(config.n_grid)
            for rep in range(config.reps)
            if (cell, rep) not in records
        ]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(lambda args: work(*args), pending))
        else:
            for args in pending:
                work(*args)
    finally:
        if sink is not None:
            sink.close()

    cells = summarize_records(config.kind, config.n_grid, records)
    return ExperimentResult(
        config=config.to_dict(),
        kind=config.kind,
        cells=cells,
        wall_clock_s=time.perf_counter() - started,
    )


def _binomial_ci(successes: int, trials: int) -> tuple[float, float]:
    """95% Wilson interval."""
    if trials == 0:
        return 0.0, 1.0
    z = 1.959963984540054
    phat = successes / trials
    denom = 1.0 + z**2 / trials
    center = (phat + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z**2 / (4 * trials**2)) / denom
    return center - half, center + half


def summarize_records(kind: str, n_grid, records: dict[tuple[int, int], dict]) -> list[dict]:
    """Per-cell summary rows from replicate records (sorted, deterministic)."""
    cells = []
    for cell, n in enumerate(n_grid):
        rows = [records[k] for k in sorted(records) if k[0] == cell]
        cell_summary: dict = {"cell": cell, "n": n, "reps_done": len(rows)}
        if not rows:
            cells.append(cell_summary)
            continue
        if kind in _RATE_KINDS:
            hits = sum(int(r["reject"]) for r in rows)
            lo, hi = _binomial_ci(hits, len(rows))
            cell_summary.update(rate=hits / len(rows), ci_low=lo, ci_high=hi)
        elif kind == "stute_decay":
            vals = np.array([r["residual_sup"] for r in rows])
            cell_summary.update(
                median=float(np.median(vals)),
                q25=float(np.quantile(vals, 0.25)),
                q75=float(np.quantile(vals, 0.75)),
                mean=float(np.mean(vals)),
            )
        elif kind == "v_decay":
            vals = np.array([r["max_abs_v"] for r in rows])
            cell_summary.update(median=float(np.median(vals)), q25=float(np.quantile(vals, 0.25)), q75=float(np.quantile(vals, 0.75)))
        elif kind == "linearization":
            for gamma in ("rho", "tau", "beta"):
                vals = np.array([r[f"err_{gamma}"] for r in rows])
                cell_summary[f"median_err_{gamma}"] = float(np.median(vals))
        cells.append(cell_summary)
    return cells
