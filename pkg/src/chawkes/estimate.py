"""Long-run estimators for the scaling limit of weighted counts.

For a weight ``w`` on marks, the drift ``E(w)`` is the long-run rate of
``sum_k w(I_k)`` per unit time, and ``v(w)`` is the asymptotic variance per
event of ``g(Z_k) = w(I_k) - E(w) * delta_k``.  Scaled to physical time the
diffusion coefficient is ``v(w) / mean_delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import ChainState, EventLog, initial_state, simulate
from .exceptions import InsufficientData
from .model import ModelSpec, as_weights
from .runtime import map_ordered

__all__ = [
    "ScalingEstimate",
    "FCLTResult",
    "batch_means",
    "estimate_E",
    "estimate_v",
    "estimate_scaling",
    "fclt_experiment",
    "increment_diffusion",
    "MIN_REPLICATIONS",
]

DEFAULT_BATCHES = 64
MIN_REPLICATIONS = 30
KS_LEVEL = 0.01


def batch_means(x, batches: int = DEFAULT_BATCHES):
    """Mean of ``x``, its standard error, and the per-step variance estimate.

    Non-overlapping batches of equal length; a trailing remainder shorter
    than one batch is dropped.
    """
    x = np.asarray(x, dtype=float)
    if batches < 2:
        raise ValueError("need at least 2 batches")
    size = x.shape[0] // batches
    if size < 1:
        raise InsufficientData(f"{x.shape[0]} samples cannot fill {batches} batches")
    sums = x[: size * batches].reshape(batches, size).sum(axis=1)
    var_step = float(np.var(sums, ddof=1) / size)
    mean = float(x.mean())
    return mean, math.sqrt(var_step / x.shape[0]), var_step


@dataclass
class ScalingEstimate:
    E_w: float
    mean_delta: float
    v_w: float
    v_w_se: float
    batches: int
    batch_length: int
    E_w_se: float = math.nan

    @property
    def diffusion(self) -> float:
        """Continuous-time variance rate ``v(w) / mean_delta``."""
        return self.v_w / self.mean_delta

    @property
    def diffusion_se(self) -> float:
        return self.v_w_se / self.mean_delta

    def to_dict(self) -> dict:
        return {
            "E_w": self.E_w,
            "E_w_se": self.E_w_se,
            "mean_delta": self.mean_delta,
            "v_w_per_event": self.v_w,
            "v_w_per_event_se": self.v_w_se,
            "diffusion_per_time": self.diffusion,
            "diffusion_per_time_se": self.diffusion_se,
            "batches": self.batches,
            "batch_length": self.batch_length,
        }


def _weighted_marks(log: EventLog, w) -> np.ndarray:
    w_o = np.concatenate([[0.0], np.asarray(w, dtype=float)])
    return w_o[log.marks]


def estimate_E(log: EventLog, w) -> tuple[float, float]:
    """Ratio estimator ``(sum of w over events / elapsed time, elapsed time / events)``."""
    if len(log) == 0:
        raise InsufficientData("empty event log")
    elapsed = float(log.times[-1] - log.init.t)
    return float(_weighted_marks(log, w).sum()) / elapsed, elapsed / len(log)


def estimate_v(log: EventLog, w, E_w: float, batches: int = DEFAULT_BATCHES) -> tuple[float, float]:
    """Batch-means estimate of the per-event asymptotic variance of ``w(I) - E_w * delta``.

    The standard error treats batch sums as Gaussian, so the variance
    estimate is scaled chi-square with ``batches - 1`` degrees of freedom.
    """
    if len(log) < 2 * batches * 10:
        raise InsufficientData(f"need at least {2 * batches * 10} events, got {len(log)}")
    g = _weighted_marks(log, w) - E_w * log.deltas
    _, _, v = batch_means(g, batches)
    return v, v * math.sqrt(2.0 / (batches - 1))


def estimate_scaling(log: EventLog, w, batches: int = DEFAULT_BATCHES) -> ScalingEstimate:
    E_w, mean_delta = estimate_E(log, w)
    v, se = estimate_v(log, w, E_w, batches)
    elapsed = float(log.times[-1] - log.init.t)
    return ScalingEstimate(
        E_w=E_w,
        mean_delta=mean_delta,
        v_w=v,
        v_w_se=se,
        batches=batches,
        batch_length=len(log) // batches,
        E_w_se=math.sqrt(v / mean_delta / elapsed),
    )


# -- replication experiment ------------------------------------------------------

@dataclass
class FCLTResult:
    """Normalized weighted counts ``T**-0.5 * (N_w(tT) - tT*E_w)``, one row per replication."""

    values: np.ndarray
    t_grid: np.ndarray
    horizon: float
    pilot: ScalingEstimate
    diagnostics: dict = field(default_factory=dict)

    def rows(self):
        for r in range(self.values.shape[0]):
            for k, t in enumerate(self.t_grid):
                yield r, float(t), float(self.values[r, k])


def _path_values(spec, w, init, horizon, seed, stream, t_grid, E_w):
    log = simulate(spec, init, horizon=horizon, seed=seed, stream=stream, snapshots=False)
    cum = np.concatenate([[0.0], np.cumsum(_weighted_marks(log, w))])
    idx = np.searchsorted(log.times, t_grid * horizon, side="right")
    return (cum[idx] - t_grid * horizon * E_w) / math.sqrt(horizon)


def increment_diffusion(values: np.ndarray, t_grid: np.ndarray) -> tuple[float, float]:
    """Pool grid increments into one estimate of the variance rate, with its standard error."""
    dt = np.diff(t_grid)
    keep = dt > 0
    inc = np.diff(values, axis=1)[:, keep]
    R = values.shape[0]
    per = inc.var(axis=0, ddof=1) / dt[keep]
    est = float(per.mean())
    se = est * math.sqrt(2.0 / (per.shape[0] * (R - 1)))
    return est, se


def _diagnostics(values, t_grid, pilot) -> dict:
    R = values.shape[0]
    var_t = values.var(axis=0, ddof=1)
    end = values[:, -1]
    sd = float(end.std(ddof=1))
    if sd > 0:
        ks = stats.kstest(end, "norm", args=(float(end.mean()), sd))
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
    else:
        ks_stat, ks_p = math.nan, math.nan
    inc = np.diff(values, axis=1)
    corrs = []
    for k in range(inc.shape[1] - 1):
        a, b = inc[:, k], inc[:, k + 1]
        if a.std() > 0 and b.std() > 0:
            corrs.append(float(np.corrcoef(a, b)[0, 1]))
    diff_est, diff_se = increment_diffusion(values, t_grid) if len(t_grid) > 1 else (math.nan, math.nan)
    skew = float(stats.skew(end)) if sd > 0 else 0.0
    skew_se = math.sqrt(6.0 * R * (R - 1) / ((R - 2) * (R + 1) * (R + 3)))
    return {
        "replications": R,
        "variance_by_t": [float(v) for v in var_t],
        "expected_variance_by_t": [float(t) * pilot.diffusion for t in t_grid],
        "diffusion_pilot": pilot.diffusion,
        "diffusion_pilot_se": pilot.diffusion_se,
        "diffusion_increments": diff_est,
        "diffusion_increments_se": diff_se,
        "endpoint_mean": float(end.mean()),
        "endpoint_variance": float(end.var(ddof=1)),
        "endpoint_skewness": skew,
        "endpoint_skewness_se": skew_se,
        "ks_statistic": ks_stat,
        "ks_pvalue": ks_p,
        "ks_normal_at_0.01": bool(ks_p > KS_LEVEL) if not math.isnan(ks_p) else None,
        "increment_correlations": corrs,
        "increment_correlation_band": 3.0 / math.sqrt(R),
    }


def fclt_experiment(spec: ModelSpec, w, horizon: float, replications: int, t_grid=None,
                    seed: int = 0, init: ChainState | None = None, threads: int | None = None,
                    pilot_factor: float = 10.0, batches: int = DEFAULT_BATCHES) -> FCLTResult:
    """Replicate the physical-time scaling of ``N_w`` on ``[0, horizon]``.

    The centering ``E_w`` comes from one pilot run ``pilot_factor`` times
    longer (stream 0); replication ``r`` uses stream ``r + 1``.
    """
    w = as_weights(w, spec)
    if replications < 3:
        raise ValueError("need at least 3 replications")
    t_grid = np.linspace(0.0, 1.0, 5) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(t_grid < 0) or np.any(t_grid > 1) or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be sorted values in [0, 1]")
    init = initial_state(spec) if init is None else init

    pilot_log = simulate(spec, init, horizon=pilot_factor * horizon, seed=seed, stream=0, snapshots=False)
    pilot = estimate_scaling(pilot_log, w, batches)
    del pilot_log

    rows = map_ordered(
        lambda r: _path_values(spec, w, init, horizon, seed, r + 1, t_grid, pilot.E_w),
        range(replications),
        threads,
    )
    values = np.vstack(rows)
    return FCLTResult(values, t_grid, float(horizon), pilot, _diagnostics(values, t_grid, pilot))
