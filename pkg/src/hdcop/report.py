"""Report rendering: delimited summaries plus matplotlib figures on disk.

The harness itself only emits JSONL/CSV; this module is the presentation
layer that turns results (or a pair table) into a summary CSV next to PNG
figures.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .association import GAMMAS, PairStatisticsTable
from .harness import ExperimentResult

__all__ = ["experiment_summary_csv", "write_experiment_report", "write_pairs_report"]


def experiment_summary_csv(result: ExperimentResult) -> str:
    """Per-cell summary rows as CSV text."""
    cells = result.cells
    if not cells:
        return ""
    cols: list[str] = []
    for row in cells:
        for key in row:
            if key not in cols:
                cols.append(key)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols)
    writer.writeheader()
    for row in cells:
        writer.writerow(row)
    return buf.getvalue()


def _decay_figure(result: ExperimentResult, metric: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ns = [c["n"] for c in result.cells if metric in c]
    med = [c[metric] for c in result.cells if metric in c]
    ax.plot(ns, med, "o-", color="C0", label="median")
    if all("q25" in c and "q75" in c for c in result.cells if metric in c):
        lo = [c["q25"] for c in result.cells if metric in c]
        hi = [c["q75"] for c in result.cells if metric in c]
        ax.fill_between(ns, lo, hi, color="C0", alpha=0.2, label="IQR")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def _rate_figure(result: ExperimentResult):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ns = [c["n"] for c in result.cells if "rate" in c]
    rate = [c["rate"] for c in result.cells if "rate" in c]
    lo = [c["ci_low"] for c in result.cells if "rate" in c]
    hi = [c["ci_high"] for c in result.cells if "rate" in c]
    x = np.arange(len(ns))
    yerr = np.vstack([np.array(rate) - lo, np.array(hi) - rate])
    ax.errorbar(x, rate, yerr=yerr, fmt="o", color="C0", capsize=3, label="rejection rate")
    alpha = result.config.get("alpha", 0.05)
    ax.axhline(alpha, color="C3", ls="--", lw=1, label=f"nominal {alpha}")
    ax.set_xticks(x, [str(n) for n in ns])
    ax.set_xlabel("sample size n")
    ax.set_ylabel("rejection rate")
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def _linearization_figure(result: ExperimentResult):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ns = [c["n"] for c in result.cells]
    for i, gamma in enumerate(("rho", "tau", "beta")):
        key = f"median_err_{gamma}"
        if all(key in c for c in result.cells):
            ax.plot(ns, [c[key] for c in result.cells], "o-", color=f"C{i}", label=gamma)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("median max linearization error")
    ax.legend(frameon=False)
    fig.tight_layout()
    return fig


def write_experiment_report(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Write summary.csv and a figure for the experiment kind; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out / "summary.csv"
    csv_path.write_text(experiment_summary_csv(result))
    written.append(csv_path)

    kind = result.kind
    fig = None
    if kind == "stute_decay":
        fig = _decay_figure(result, "median", "median residual sup")
    elif kind == "v_decay":
        fig = _decay_figure(result, "median", "median max |V|")
    elif kind in ("max_null_calibration", "moebius_calibration", "fwer"):
        fig = _rate_figure(result)
    elif kind == "linearization":
        fig = _linearization_figure(result)
    if fig is not None:
        fig_path = out / f"{kind}.png"
        fig.savefig(fig_path, dpi=150)
        plt.close(fig)
        written.append(fig_path)
    return written


def write_pairs_report(table: PairStatisticsTable, out_dir: str | Path) -> list[Path]:
    """Write pairs.csv and one heatmap per computed measure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out / "pairs.csv"
    csv_path.write_text(table.to_csv())
    written.append(csv_path)

    for gamma in GAMMAS:
        vals = getattr(table, gamma)
        if vals is None:
            continue
        mat = np.full((table.d, table.d), np.nan)
        for p, (i, j) in enumerate(table.pairs):
            mat[i, j] = mat[j, i] = vals[p]
        fig, ax = plt.subplots(figsize=(4.4, 3.8))
        im = ax.imshow(mat, vmin=-1, vmax=1, cmap="RdBu_r")
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_title(f"pairwise {gamma}")
        ax.set_xlabel("column")
        ax.set_ylabel("column")
        fig.tight_layout()
        fig_path = out / f"pairs_{gamma}.png"
        fig.savefig(fig_path, dpi=150)
        plt.close(fig)
        written.append(fig_path)
    return written
