"""Figures written next to the CSV/JSON outputs of the command-line tools.

matplotlib is imported on first use so the simulation core does not depend
on it; install the ``plot`` extra to enable these functions.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

_RC = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.frameon": False,
}


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("figures need matplotlib: pip install 'artifact[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(_RC)
    return plt


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # Fixed metadata keeps repeated runs byte-identical.
    fig.savefig(path, metadata={"Software": None})
    fig.clf()


def plot_event_log(log, spec, path, max_events: int = 2000):
    """Constraint path and total self-excitation over the first events."""
    plt = _pyplot()
    n = min(len(log), max_events)
    fig, axes = plt.subplots(2, 1, figsize=(7, 4.5), sharex=True)
    t = np.concatenate([[log.init.t], log.times[:n]])
    S = np.vstack([log.init.S, log.constraint_path()[:n]]) if spec.q else np.zeros((n + 1, 0))
    for j in range(S.shape[1]):
        axes[0].step(t, S[:, j], where="post", lw=0.8, label=f"S_{j + 1}")
    axes[0].set_ylabel("constraint")
    if spec.q:
        axes[0].legend(loc="upper right")
    if log.lam is not None:
        lam = np.vstack([log.init.lam, log.lam[:n]]).sum(axis=1)
        axes[1].plot(t, lam, lw=0.6, color="C3")
    axes[1].set_ylabel("total excitation")
    axes[1].set_xlabel("time")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_fclt(result, path, max_paths: int = 30):
    """Replication fan, variance against ``t``, and the endpoint histogram."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    t = result.t_grid
    for row in result.values[:max_paths]:
        axes[0].plot(t, row, lw=0.5, alpha=0.6)
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("normalized count")

    d = result.diagnostics
    axes[1].plot(t, d["variance_by_t"], "o-", ms=3, label="replications")
    axes[1].plot(t, d["expected_variance_by_t"], "--", label="pilot estimate")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("variance")
    axes[1].legend()

    end = result.values[:, -1]
    axes[2].hist(end, bins=max(10, int(math.sqrt(end.size))), density=True, alpha=0.6)
    sd = end.std(ddof=1)
    if sd > 0:
        x = np.linspace(end.min(), end.max(), 200)
        axes[2].plot(x, np.exp(-0.5 * ((x - end.mean()) / sd) ** 2) / (sd * math.sqrt(2 * math.pi)))
    axes[2].set_title(f"KS p = {d['ks_pvalue']:.3g}")
    axes[2].set_xlabel("endpoint")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_lob(mid, spread, report, path):
    """One mid-price/spread path, the spread histogram and scaled variances by horizon."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    axes[0].step(mid.times, mid.values, where="post", lw=0.6, label="mid")
    ax2 = axes[0].twinx()
    ax2.step(spread.times, spread.values, where="post", lw=0.4, color="C1", alpha=0.6)
    ax2.set_ylabel("spread (ticks)")
    axes[0].set_xlabel("time")
    axes[0].set_ylabel("mid price")

    levels, counts = np.unique(spread.values, return_counts=True)
    axes[1].bar(levels, counts / counts.sum(), width=0.8)
    axes[1].set_yscale("log")
    axes[1].set_xlabel("spread (ticks)")
    axes[1].set_ylabel("fraction of events")

    rows = report.per_horizon
    T = [h["horizon"] for h in rows]
    axes[2].errorbar(T, [h["diffusion_per_time"] for h in rows],
                     yerr=[3 * h["diffusion_per_time_se"] for h in rows], fmt="o-", label="mid diffusion")
    axes[2].plot(T, [h["spread_scaled_variance"] for h in rows], "s--", label="spread var / T")
    axes[2].set_xscale("log")
    axes[2].set_xlabel("horizon")
    axes[2].legend()
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
